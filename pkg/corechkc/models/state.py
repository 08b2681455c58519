"""Runtime state: the variable stack and the annotated heap."""

from __future__ import annotations

from dataclasses import dataclass, field

from corechkc.models.syntax import Lit

Stack = dict[str, Lit]


@dataclass(slots=True)
class Heap:
    """Addressed cells of annotated literals plus a bump allocation cursor.

    Address 0 is never bound; the first allocation lands at address 1.
    """

    cells: dict[int, Lit] = field(default_factory=dict)
    cursor: int = 1

    def copy(self) -> Heap:
        return Heap(dict(self.cells), self.cursor)

    def get(self, addr: int) -> Lit | None:
        return self.cells.get(addr)

    def __contains__(self, addr: int) -> bool:
        return addr in self.cells


CStack = dict[str, int]


@dataclass(slots=True)
class CHeap:
    """The erased heap: plain integers, same addressing as :class:`Heap`."""

    cells: dict[int, int] = field(default_factory=dict)
    cursor: int = 1

    def copy(self) -> CHeap:
        return CHeap(dict(self.cells), self.cursor)
