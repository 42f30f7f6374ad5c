"""Hash families that map vectors to per-table bucket codes.

Two families are provided, both parameterized by K functions per table and
L tables:

* ``SimHashFamily``: signs of random projections. Two vectors agree on a
  single bit with probability ``1 - angle/pi``, so bucket codes preserve
  cosine similarity.
* ``DwtaFamily``: winner-take-all ranks over permuted coordinate bins, with
  deterministic filling of empty bins so the family stays informative on
  extremely sparse inputs. Codes preserve rank similarity.

A family instance is immutable after construction: computing codes never
mutates state, so one instance can be shared freely across workers. Codes
are deterministic functions of (vector, seed, K, L).

The module also provides the closed-form collision and retrieval
probabilities used throughout the test-suite and the benchmark harness:
``simhash_collision_prob`` for a single bit, and ``retrieval_prob`` for the
probability that a (K, L) table store returns a stored item whose single-
function collision probability with the query is ``alpha``.
"""

from __future__ import annotations

import math

import numpy as np

from lshsoftmax.errors import ConfigError, DegenerateInputError
from lshsoftmax.vectors import as_index_value, cosine

_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    """Fixed 64-bit mixer; the basis of the densification probe hash."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def probe_delta(seed: int, bin_index: int, attempt: int, total_bins: int) -> int:
    """Deterministic probe offset in [1, total_bins) for (bin, attempt)."""
    if total_bins <= 1:
        return 0
    h = _splitmix64((seed & _MASK64) ^ _splitmix64(bin_index) ^ _splitmix64(attempt * 0x9E3779B97F4A7C15))
    return 1 + h % (total_bins - 1)


def densify(symbols, seed: int = 0) -> np.ndarray:
    """Fill empty bins with the symbol of a deterministically probed donor.

    ``symbols`` is an integer sequence where -1 marks an empty bin. Each
    empty bin ``b`` probes ``(b + probe_delta(seed, b, attempt, n)) % n``
    for attempt = 1, 2, ... until it reaches a bin that was nonempty in the
    input, and copies that bin's symbol. The result depends only on the
    input and the seed.
    """
    out = np.asarray(symbols, dtype=np.int64).copy()
    total = out.size
    occupied = out >= 0
    if not occupied.any():
        raise DegenerateInputError("cannot densify: all bins are empty")
    empty = np.flatnonzero(~occupied)
    if empty.size == 0:
        return out
    donors = out.copy()
    limit = 64 * total
    for b in empty:
        attempt = 1
        while True:
            cand = (b + probe_delta(seed, int(b), attempt, total)) % total
            if occupied[cand]:
                out[b] = donors[cand]
                break
            attempt += 1
            if attempt > limit:
                # probe hash failed to cover the occupied set; sweep instead
                cand = (b + 1) % total
                while not occupied[cand]:
                    cand = (cand + 1) % total
                out[b] = donors[cand]
                break
    return out


class SimHashFamily:
    """K*L signed random projections with a shared seed.

    Each table's code concatenates K bits, bit j being 1 iff the dot
    product with plane ``t*K + j`` is strictly positive. Same seed, same
    planes, same codes, on any platform.
    """

    kind = "simhash"

    def __init__(self, dim: int, k: int, l: int, seed: int = 0):
        if dim < 1 or k < 1 or l < 1:
            raise ConfigError(f"invalid SimHash parameters dim={dim} k={k} l={l}")
        self.dim = int(dim)
        self.k = int(k)
        self.l = int(l)
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        self.planes = rng.standard_normal((self.k * self.l, self.dim))
        self._pow2 = (1 << np.arange(self.k - 1, -1, -1)).astype(np.int64)

    @property
    def n_buckets(self) -> int:
        return 1 << self.k

    def codes(self, v) -> np.ndarray:
        """L bucket codes for one vector (sparse or dense)."""
        idx, vals, dim = as_index_value(v)
        if dim != self.dim:
            raise ConfigError(f"vector dimension {dim} != family dimension {self.dim}")
        if idx.size == 0:
            raise DegenerateInputError("sign of a zero vector is undefined")
        dots = self.planes[:, idx] @ vals
        bits = (dots > 0).reshape(self.l, self.k)
        return bits @ self._pow2

    def codes_batch(self, mat: np.ndarray) -> np.ndarray:
        """Codes for a stack of dense rows; shape (n, L)."""
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] != self.dim:
            raise ConfigError(f"expected (n, {self.dim}) matrix, got {mat.shape}")
        if not mat.any(axis=1).all():
            raise DegenerateInputError("sign of a zero vector is undefined")
        dots = mat @ self.planes.T
        bits = (dots > 0).reshape(mat.shape[0], self.l, self.k)
        return bits @ self._pow2


class DwtaFamily:
    """Winner-take-all hashing over permuted coordinate bins.

    The input dimension is covered by seeded permutations, each split into
    ``floor(dim / m)`` bins of m consecutive slots. A bin's hash symbol is
    the within-bin slot (0..m-1) holding the largest of the coordinates
    mapped into it, considering only coordinates present in the sparse
    input. Bins with no present coordinate are filled by ``densify``. The
    first K*L bins, in permutation order, are grouped K at a time into L
    base-m codes.
    """

    kind = "dwta"

    def __init__(self, dim: int, k: int, l: int, m: int, seed: int = 0):
        if dim < 1 or k < 1 or l < 1:
            raise ConfigError(f"invalid DWTA parameters dim={dim} k={k} l={l}")
        if m < 2 or m > dim:
            raise ConfigError(f"bin size m={m} must satisfy 2 <= m <= dim={dim}")
        self.dim = int(dim)
        self.k = int(k)
        self.l = int(l)
        self.m = int(m)
        self.seed = int(seed)
        self.bins_per_perm = self.dim // self.m
        needed = self.k * self.l
        # enough permutations that usable bins cover K*L even when m does
        # not divide dim
        self.n_perms = max(
            math.ceil(needed * self.m / self.dim),
            math.ceil(needed / self.bins_per_perm),
        )
        rng = np.random.default_rng(seed)
        perms = np.stack([rng.permutation(self.dim) for _ in range(self.n_perms)])
        self._init_from_perms(perms)

    def _init_from_perms(self, perms: np.ndarray):
        self.perms = perms.astype(np.int64)
        inv = np.empty_like(self.perms)
        rows = np.arange(self.n_perms)[:, None]
        inv[rows, self.perms] = np.arange(self.dim)[None, :]
        self.inv = inv
        self.total_bins = self.n_perms * self.bins_per_perm
        if self.total_bins < self.k * self.l:
            raise ConfigError("not enough bins to form K*L hash functions")
        self._powm = (self.m ** np.arange(self.k - 1, -1, -1)).astype(np.int64)
        # flat coordinate index covering the used bins of every permutation,
        # for the batched path
        self._used_coords = self.perms[:, : self.bins_per_perm * self.m].reshape(-1)

    @classmethod
    def from_permutations(cls, perms, dim: int, k: int, l: int, m: int, seed: int = 0) -> "DwtaFamily":
        """Build a family from explicit permutations (mainly for tests)."""
        perms = np.asarray(perms, dtype=np.int64)
        fam = cls.__new__(cls)
        fam.dim, fam.k, fam.l, fam.m, fam.seed = int(dim), int(k), int(l), int(m), int(seed)
        if fam.m < 2 or fam.m > fam.dim:
            raise ConfigError(f"bin size m={m} must satisfy 2 <= m <= dim={dim}")
        fam.bins_per_perm = fam.dim // fam.m
        fam.n_perms = perms.shape[0]
        for p in range(fam.n_perms):
            if not np.array_equal(np.sort(perms[p]), np.arange(dim)):
                raise ConfigError(f"row {p} is not a permutation of 0..{dim - 1}")
        fam._init_from_perms(perms)
        return fam

    @property
    def n_buckets(self) -> int:
        return self.m ** self.k

    def _symbols(self, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
        """Per-bin winner slots for the first K*L bins; -1 marks empty."""
        used = self.k * self.l
        pos = self.inv[:, idx]                      # (n_perms, nnz)
        local_bin = pos // self.m
        offset = pos % self.m
        gbin = np.arange(self.n_perms)[:, None] * self.bins_per_perm + local_bin
        valid = (local_bin < self.bins_per_perm) & (gbin < used)
        g = gbin[valid]
        off = offset[valid]
        val = np.broadcast_to(vals, pos.shape)[valid]
        syms = np.full(used, -1, dtype=np.int64)
        if g.size == 0:
            return syms
        # group by bin; within a bin keep the largest value, breaking value
        # ties toward the lowest slot (matches np.argmax on a dense bin)
        order = np.lexsort((-off, val, g))
        g, off = g[order], off[order]
        boundaries = np.flatnonzero(np.diff(g)) if g.size > 1 else np.empty(0, dtype=np.int64)
        last = np.r_[boundaries, g.size - 1]
        syms[g[last]] = off[last]
        return syms

    def codes(self, v) -> np.ndarray:
        """L bucket codes for one vector (sparse or dense)."""
        idx, vals, dim = as_index_value(v)
        if dim != self.dim:
            raise ConfigError(f"vector dimension {dim} != family dimension {self.dim}")
        if idx.size == 0:
            raise DegenerateInputError("winner-take-all of a zero vector is undefined")
        syms = self._symbols(idx, vals)
        if (syms < 0).any():
            syms = densify(syms, seed=self.seed)
        return syms.reshape(self.l, self.k) @ self._powm

    def codes_batch(self, mat: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Codes for a stack of dense rows; shape (n, L).

        Zero entries count as absent, exactly as in the sparse path.
        """
        mat = np.asarray(mat, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[1] != self.dim:
            raise ConfigError(f"expected (n, {self.dim}) matrix, got {mat.shape}")
        used = self.k * self.l
        n = mat.shape[0]
        out = np.empty((n, self.l), dtype=np.int64)
        for start in range(0, n, chunk):
            rows = mat[start : start + chunk]
            binned = rows[:, self._used_coords].reshape(len(rows), self.total_bins, self.m)
            binned = binned[:, :used, :]
            present = binned != 0.0
            if not present.any(axis=(1, 2)).all():
                raise DegenerateInputError("winner-take-all of a zero vector is undefined")
            masked = np.where(present, binned, -np.inf)
            syms = masked.argmax(axis=2)
            syms[~present.any(axis=2)] = -1
            for i in range(len(rows)):
                row_syms = syms[i]
                if (row_syms < 0).any():
                    row_syms = densify(row_syms, seed=self.seed)
                out[start + i] = row_syms.reshape(self.l, self.k) @ self._powm
        return out


def simhash_codes(v, family: SimHashFamily) -> np.ndarray:
    """Functional form of ``SimHashFamily.codes``."""
    return family.codes(v)


def dwta_codes(v, family: DwtaFamily) -> np.ndarray:
    """Functional form of ``DwtaFamily.codes``."""
    return family.codes(v)


def simhash_collision_prob(x, y) -> float:
    """Probability that one random-projection bit of x and y agrees.

    Equals ``1 - angle(x, y) / pi``; the cosine is clamped to [-1, 1]
    before the arccos to guard against floating-point drift.
    """
    c = min(1.0, max(-1.0, cosine(x, y)))
    return 1.0 - math.acos(c) / math.pi


def retrieval_prob(alpha: float, k: int, l: int) -> float:
    """Probability that a (K, L) table store retrieves an item whose
    per-function collision probability with the query is ``alpha``.

    An item is retrieved iff at least one of the L tables matches on all
    of its K functions, hence ``1 - (1 - alpha**K)**L``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if k < 1 or l < 1:
        raise ValueError(f"K and L must be >= 1, got K={k} L={l}")
    a_k = alpha**k
    if a_k >= 1.0:
        return 1.0
    return float(-np.expm1(l * np.log1p(-a_k)))
