"""Exact cosine top-k over a flat float64 matrix.

Brute-force scan, desk scale. Vectors are unit-norm so cosine is a dot
product. Removals tombstone the row; replacements append a fresh row.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


class VectorIndex:
    def __init__(self, dimension: int, initial_capacity: int = 64) -> None:
        self.dimension = dimension
        self._matrix = np.zeros((initial_capacity, dimension), dtype=np.float64)
        self._alive = np.zeros(initial_capacity, dtype=bool)
        self._ids: list[str | None] = [None] * initial_capacity
        self._row_of: dict[str, int] = {}
        self._n = 0

    def __len__(self) -> int:
        return len(self._row_of)

    def __contains__(self, item_id: str) -> bool:
        return item_id in self._row_of

    def vector(self, item_id: str) -> np.ndarray:
        row = self._row_of[item_id]
        return self._matrix[row]

    def upsert(self, item_id: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"vector has dimension {vec.shape[-1]}, index uses {self.dimension}"
            )
        old = self._row_of.pop(item_id, None)
        if old is not None:
            self._alive[old] = False
            self._ids[old] = None
        if self._n == self._matrix.shape[0]:
            self._grow()
        row = self._n
        self._matrix[row] = vec
        self._alive[row] = True
        self._ids[row] = item_id
        self._row_of[item_id] = row
        self._n += 1

    def remove(self, item_id: str) -> None:
        row = self._row_of.pop(item_id, None)
        if row is not None:
            self._alive[row] = False
            self._ids[row] = None

    def search(self, query: np.ndarray, limit: int) -> list[tuple[str, float]]:
        """Exact top `limit` by cosine; ties broken by ascending id."""
        query = np.asarray(query, dtype=np.float64)
        if query.ndim != 1 or query.shape[0] != self.dimension:
            raise DimensionMismatch(
                f"query has dimension {query.shape[-1]}, index uses {self.dimension}"
            )
        if not self._row_of or limit <= 0:
            return []
        scores = self._matrix[: self._n] @ query
        scores[~self._alive[: self._n]] = -np.inf
        live = len(self._row_of)
        k = min(limit, live)
        if k < self._n:
            part = np.argpartition(-scores, k - 1)[:k]
            kth_value = scores[part].min()
            # Pull in every row tied with the cutoff so the id tie-break is
            # exact, not dependent on argpartition's arbitrary ordering.
            candidate_rows = np.flatnonzero(scores >= kth_value)
        else:
            candidate_rows = np.flatnonzero(self._alive[: self._n])
        ranked = sorted(
            ((self._ids[r], float(scores[r])) for r in candidate_rows),
            key=lambda kv: (-kv[1], kv[0]),
        )
        return ranked[:k]

    def _grow(self) -> None:
        capacity = max(64, self._matrix.shape[0] * 2)
        matrix = np.zeros((capacity, self.dimension), dtype=np.float64)
        matrix[: self._n] = self._matrix[: self._n]
        alive = np.zeros(capacity, dtype=bool)
        alive[: self._n] = self._alive[: self._n]
        self._matrix = matrix
        self._alive = alive
        self._ids.extend([None] * (capacity - len(self._ids)))
