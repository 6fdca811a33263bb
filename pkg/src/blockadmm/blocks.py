"""Block-partitioned vectors and block-column linear maps.

A decision variable is split into ``B`` contiguous blocks of sizes
``n_1, ..., n_B``.  A :class:`BlockLinearMap` stores one dense ``l x n_t``
matrix per block and acts as ``A(x) = sum_t A_t x_t``.  Everything is dense:
the target problems are desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegenerateOperatorError, ShapeError

__all__ = [
    "BlockSizes",
    "BlockVector",
    "BlockLinearMap",
    "BlockNorms",
    "block_norms",
]

# Singular values below this fraction of the largest one count as zero when
# extracting the smallest positive singular value.
_SING_VAL_REL_CUTOFF = 1e-10


class BlockSizes:
    """Partition of ``n`` coordinates into ``B`` contiguous blocks."""

    __slots__ = ("sizes", "offsets", "total")

    def __init__(self, sizes: Sequence[int]):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) == 0:
            raise ShapeError("need at least one block")
        if any(s < 1 for s in sizes):
            raise ShapeError(f"block sizes must be positive, got {sizes}")
        self.sizes = sizes
        self.offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(sizes)]))
        self.total = self.offsets[-1]

    @property
    def count(self) -> int:
        return len(self.sizes)

    def index(self, t: int) -> slice:
        """Flat-array slice of block ``t`` (0-based)."""
        return slice(self.offsets[t], self.offsets[t + 1])

    def __len__(self) -> int:
        return len(self.sizes)

    def __eq__(self, other) -> bool:
        return isinstance(other, BlockSizes) and self.sizes == other.sizes

    def __hash__(self) -> int:
        return hash(self.sizes)

    def __repr__(self) -> str:
        return f"BlockSizes({list(self.sizes)})"


class BlockVector:
    """A flat float array viewed through a :class:`BlockSizes` partition.

    Block access returns numpy views into the flat storage, so a
    Gauss-Seidel sweep can overwrite one block in place without copying.
    """

    __slots__ = ("sizes", "data")

    def __init__(self, sizes: BlockSizes, data: np.ndarray):
        data = np.asarray(data, dtype=float)
        if data.ndim != 1 or data.shape[0] != sizes.total:
            raise ShapeError(
                f"data has shape {data.shape}, expected ({sizes.total},)"
            )
        self.sizes = sizes
        self.data = data

    @classmethod
    def zeros(cls, sizes: BlockSizes) -> "BlockVector":
        return cls(sizes, np.zeros(sizes.total))

    @classmethod
    def from_blocks(cls, blocks: Sequence[np.ndarray]) -> "BlockVector":
        sizes = BlockSizes([len(np.atleast_1d(b)) for b in blocks])
        return cls(sizes, np.concatenate([np.atleast_1d(b) for b in blocks]))

    def block(self, t: int) -> np.ndarray:
        """View of block ``t``; writing to it mutates this vector."""
        return self.data[self.sizes.index(t)]

    def set_block(self, t: int, values: np.ndarray) -> None:
        self.data[self.sizes.index(t)] = values

    def copy(self) -> "BlockVector":
        return BlockVector(self.sizes, self.data.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def __len__(self) -> int:
        return self.sizes.total

    def __repr__(self) -> str:
        return f"BlockVector(sizes={list(self.sizes.sizes)}, data={self.data!r})"


class BlockLinearMap:
    """Dense linear map ``A(x) = sum_t A_t x_t`` with per-block matrices.

    Parameters
    ----------
    blocks : sequence of 2-d arrays
        One ``l x n_t`` matrix per block; all must share the row count ``l``.
    gram_diags : sequence of (array or None), optional
        Known diagonals of ``A_t^T A_t`` for blocks whose Gram matrix is
        diagonal.  Generators with structured maps supply these so solvers
        can take the exact separable path without forming Gram matrices.
    norm_hints : sequence of (float or None), optional
        Known spectral norms per block, to skip SVDs on large blocks.
    min_sval_hint : float, optional
        Known smallest positive singular value of the stacked map.
    """

    def __init__(self, blocks, gram_diags=None, norm_hints=None, min_sval_hint=None):
        mats = [np.asarray(b, dtype=float) for b in blocks]
        if not mats:
            raise ShapeError("need at least one block matrix")
        if any(m.ndim != 2 for m in mats):
            raise ShapeError("block matrices must be 2-dimensional")
        rows = {m.shape[0] for m in mats}
        if len(rows) != 1:
            raise ShapeError(f"blocks disagree on row count: {sorted(rows)}")
        if not any(np.any(m) for m in mats):
            raise DegenerateOperatorError("all blocks of the linear map are zero")
        self.blocks = mats
        self.rows = mats[0].shape[0]
        self.domain = BlockSizes([m.shape[1] for m in mats])
        self._gram_diags = list(gram_diags) if gram_diags is not None else [None] * len(mats)
        self._norms = list(norm_hints) if norm_hints is not None else [None] * len(mats)
        self._min_sval = min_sval_hint

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    def _check_domain(self, x: BlockVector) -> None:
        if x.sizes != self.domain:
            raise ShapeError(
                f"vector partition {list(x.sizes.sizes)} does not match "
                f"map domain {list(self.domain.sizes)}"
            )

    def apply(self, x: BlockVector) -> np.ndarray:
        """``sum_t A_t x_t`` as a length-``rows`` array."""
        self._check_domain(x)
        out = np.zeros(self.rows)
        for t, mat in enumerate(self.blocks):
            out += mat @ x.block(t)
        return out

    def apply_block(self, t: int, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.blocks[t].shape[1],):
            raise ShapeError(f"block {t} expects length {self.blocks[t].shape[1]}")
        return self.blocks[t] @ u

    def adjoint(self, u: np.ndarray) -> BlockVector:
        """Adjoint image: block ``t`` of the result is ``A_t^T u``."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.rows,):
            raise ShapeError(f"adjoint expects length {self.rows}, got {u.shape}")
        out = BlockVector.zeros(self.domain)
        for t, mat in enumerate(self.blocks):
            out.block(t)[:] = mat.T @ u
        return out

    def adjoint_block(self, t: int, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.rows,):
            raise ShapeError(f"adjoint expects length {self.rows}, got {u.shape}")
        return self.blocks[t].T @ u

    def stacked(self) -> np.ndarray:
        """The full ``l x n`` matrix ``[A_1 ... A_B]``."""
        return np.hstack(self.blocks)

    def block_norm(self, t: int) -> float:
        """Spectral norm of block ``t`` (cached)."""
        if self._norms[t] is None:
            self._norms[t] = float(np.linalg.norm(self.blocks[t], 2))
        return self._norms[t]

    def gram_diag(self, t: int) -> Optional[np.ndarray]:
        """Diagonal of ``A_t^T A_t`` when that Gram matrix is diagonal.

        Computed exactly for small blocks; larger blocks rely on the
        generator-supplied hint and return ``None`` otherwise.
        """
        cached = self._gram_diags[t]
        if cached is not None:
            return np.asarray(cached, dtype=float)
        mat = self.blocks[t]
        if mat.shape[1] > 256:
            return None
        gram = mat.T @ mat
        off = gram - np.diag(np.diag(gram))
        scale = max(1.0, float(np.abs(gram).max()))
        if np.abs(off).max() <= 1e-12 * scale:
            diag = np.diag(gram).copy()
            self._gram_diags[t] = diag
            return diag
        return None

    def min_positive_singular_value(self) -> float:
        if self._min_sval is None:
            svals = np.linalg.svd(self.stacked(), compute_uv=False)
            cutoff = _SING_VAL_REL_CUTOFF * svals[0]
            positive = svals[svals > cutoff]
            if positive.size == 0:
                raise DegenerateOperatorError("map has no positive singular values")
            self._min_sval = float(positive[-1])
        return self._min_sval


@dataclass(frozen=True)
class BlockNorms:
    per_block: tuple
    total_sq: float
    min_positive_singular: float


def block_norms(map: BlockLinearMap) -> BlockNorms:
    """Per-block spectral norms, their squared sum, and the smallest
    positive singular value of the stacked map."""
    per_block = tuple(map.block_norm(t) for t in range(map.block_count))
    total_sq = float(sum(v * v for v in per_block))
    return BlockNorms(per_block, total_sq, map.min_positive_singular_value())
