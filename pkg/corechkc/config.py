from pathlib import Path

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    fuel: int = 10000
    count: int = 20000
    depth: int = 9
    seed: int = 0
    workers: int = 8
    retries: int = 50
    unchecked_rate: float = 0.1
    host: str = "0.0.0.0"
    port: int = 8200
    log_level: str = "info"
    runs_dir: Path = Path("runs")

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "env_prefix": "CORECHKC_",
        "extra": "ignore",
    }


settings = Settings()
