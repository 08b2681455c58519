from __future__ import annotations

import logging

from fastapi import FastAPI

from corechkc.api.programs import router as programs_router
from corechkc.config import settings

logging.basicConfig(level=settings.log_level.upper())
logger = logging.getLogger(__name__)

app = FastAPI(title="CoreChkC", version="0.1.0")
app.include_router(programs_router)


@app.get("/health")
async def health():
    return {"status": "ok", "service": "corechkc"}
