"""Multi-table hash store over class identifiers.

The store follows a three-phase lifecycle: a one-time build over all class
vectors, constant-work queries that probe exactly one bucket per table, and
delete/re-add updates. An occupancy record (id -> its L codes) makes
removal possible without rehashing, which matters because the stored
vector may already have been overwritten by the time its table entry is
refreshed.

Buckets are capacity-bounded with reservoir replacement, so a query never
touches more than ``L * capacity`` ids no matter how many classes are
stored. Pass ``capacity=None`` for unbounded buckets.

Concurrency contract: queries may run concurrently with each other but
never with ``insert``/``remove``/``update``/``rebuild``, which require an
exclusive writer. The trainer alternates the two phases at batch
boundaries.
"""

from __future__ import annotations

import numpy as np

_EMPTY = np.empty(0, dtype=np.int64)


class LshTables:
    def __init__(self, family, capacity: int | None = 128, seed: int = 0):
        if capacity is not None and capacity < 1:
            raise ValueError(f"capacity must be >= 1 or None, got {capacity}")
        self.family = family
        self.capacity = capacity
        self._buckets: list[dict[int, list[int]]] = [{} for _ in range(family.l)]
        self._arrivals: list[dict[int, int]] = [{} for _ in range(family.l)]
        self._occupancy: dict[int, np.ndarray] = {}
        self._rng = np.random.default_rng(seed)
        self.n_hash_evals = 0   # hash-function evaluations (K per code)
        self.n_table_ops = 0    # bucket operations charged, K*L per insert/remove

    # -- construction ----------------------------------------------------

    @classmethod
    def build(cls, class_vectors, family, capacity: int | None = 128, seed: int = 0) -> "LshTables":
        """One-time build from (id, vector) pairs or an (ids, matrix) pair.

        Every id lands in exactly one bucket per table, subject to the
        capacity policy. Equivalent in distribution to inserting the items
        one at a time.
        """
        tables = cls(family, capacity=capacity, seed=seed)
        if isinstance(class_vectors, tuple) and len(class_vectors) == 2:
            ids, mat = class_vectors
            ids = np.asarray(ids, dtype=np.int64)
            tables._bulk_insert(ids, family.codes_batch(np.asarray(mat)))
        else:
            pairs = list(class_vectors)
            if pairs:
                ids = np.asarray([cid for cid, _ in pairs], dtype=np.int64)
                codes = np.stack([family.codes(vec) for cid, vec in pairs])
                tables._bulk_insert(ids, codes)
        return tables

    def _bulk_insert(self, ids: np.ndarray, codes: np.ndarray):
        if ids.size != len(set(ids.tolist())) or any(int(i) in self._occupancy for i in ids):
            raise ValueError("duplicate class id")
        self.n_hash_evals += ids.size * self.family.k * self.family.l
        self.n_table_ops += ids.size * self.family.k * self.family.l
        cap = self.capacity
        for t in range(self.family.l):
            col = codes[:, t]
            order = np.argsort(col, kind="stable")
            sorted_codes = col[order]
            starts = np.r_[0, np.flatnonzero(np.diff(sorted_codes)) + 1]
            ends = np.r_[starts[1:], col.size]
            buckets_t = self._buckets[t]
            arrivals_t = self._arrivals[t]
            for s, e in zip(starts, ends):
                code = int(sorted_codes[s])
                group = ids[order[s:e]]
                arrivals_t[code] = arrivals_t.get(code, 0) + group.size
                if cap is not None and group.size > cap:
                    # uniform subset: same retention law as one-at-a-time
                    # reservoir replacement
                    keep = self._rng.choice(group.size, size=cap, replace=False)
                    group = group[np.sort(keep)]
                buckets_t.setdefault(code, []).extend(int(g) for g in group)
        for i, cid in enumerate(ids):
            self._occupancy[int(cid)] = codes[i].copy()

    # -- single-item updates ----------------------------------------------

    def insert(self, cid: int, vector):
        cid = int(cid)
        if cid in self._occupancy:
            raise ValueError(f"duplicate class id {cid}")
        codes = self.family.codes(vector)
        self.n_hash_evals += self.family.k * self.family.l
        self.n_table_ops += self.family.k * self.family.l
        cap = self.capacity
        for t in range(self.family.l):
            code = int(codes[t])
            bucket = self._buckets[t].setdefault(code, [])
            arrivals = self._arrivals[t].get(code, 0) + 1
            self._arrivals[t][code] = arrivals
            if cap is None or len(bucket) < cap:
                bucket.append(cid)
            else:
                # algorithm-R reservoir: replace a uniform slot w.p. cap/arrivals
                j = int(self._rng.integers(arrivals))
                if j < cap:
                    bucket[j] = cid
        self._occupancy[cid] = codes

    def remove(self, cid: int):
        """Delete an id from all tables using its occupancy record."""
        cid = int(cid)
        codes = self._occupancy.pop(cid, None)
        if codes is None:
            raise KeyError(f"class id {cid} is not stored")
        self.n_table_ops += self.family.k * self.family.l
        for t in range(self.family.l):
            bucket = self._buckets[t].get(int(codes[t]))
            if bucket is not None:
                try:
                    bucket.remove(cid)
                except ValueError:
                    pass  # evicted from this bucket by the capacity policy
        return self

    def update(self, cid: int, new_vector):
        """Refresh an id's position after its vector changed (delete + re-add)."""
        self.remove(cid)
        self.insert(cid, new_vector)
        return self

    def rebuild(self, ids, mat):
        """Rehash every class from scratch, keeping the same hash family."""
        self._buckets = [{} for _ in range(self.family.l)]
        self._arrivals = [{} for _ in range(self.family.l)]
        self._occupancy = {}
        ids = np.asarray(ids, dtype=np.int64)
        self._bulk_insert(ids, self.family.codes_batch(np.asarray(mat)))
        return self

    # -- queries -----------------------------------------------------------

    def query(self, v) -> np.ndarray:
        """Deduplicated union of the L probed buckets, as a sorted id array.

        Costs exactly K*L hash evaluations plus at most L*capacity id reads.
        """
        codes = self.family.codes(v)
        self.n_hash_evals += self.family.k * self.family.l
        return self._gather(codes)

    def query_many(self, mat: np.ndarray) -> list[np.ndarray]:
        """Batched ``query`` for a stack of dense rows (one hash matmul)."""
        codes = self.family.codes_batch(mat)
        self.n_hash_evals += mat.shape[0] * self.family.k * self.family.l
        return [self._gather(codes[i]) for i in range(mat.shape[0])]

    def _gather(self, codes: np.ndarray) -> np.ndarray:
        out: list[int] = []
        for t in range(self.family.l):
            bucket = self._buckets[t].get(int(codes[t]))
            if bucket:
                out.extend(bucket)
        if not out:
            return _EMPTY
        return np.unique(np.asarray(out, dtype=np.int64))

    # -- introspection ------------------------------------------------------

    def __contains__(self, cid: int) -> bool:
        return int(cid) in self._occupancy

    def __len__(self) -> int:
        return len(self._occupancy)

    def stored_ids(self) -> np.ndarray:
        return np.asarray(sorted(self._occupancy), dtype=np.int64)

    def codes_of(self, cid: int) -> np.ndarray:
        return self._occupancy[int(cid)].copy()

    def bucket_scan(self) -> dict[int, list[tuple[int, int]]]:
        """Ground-truth map id -> [(table, code)] from a full bucket walk."""
        seen: dict[int, list[tuple[int, int]]] = {}
        for t, buckets_t in enumerate(self._buckets):
            for code, bucket in buckets_t.items():
                for cid in bucket:
                    seen.setdefault(cid, []).append((t, code))
        return seen

    def dump(self) -> str:
        """Diagnostic text dump: one line per nonempty bucket."""
        lines = []
        for t, buckets_t in enumerate(self._buckets):
            for code in sorted(buckets_t):
                bucket = buckets_t[code]
                if bucket:
                    ids = ",".join(str(i) for i in sorted(bucket))
                    lines.append(f"table={t}\tcode={code}\tids={ids}")
        return "\n".join(lines)
