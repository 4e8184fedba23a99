"""Artifact caching for the service process."""

from __future__ import annotations

import os

from ..forest import RandomForest, load_forest
from ..gates import GateSet
from ..graph import FactorDatabase, load_database


class ArtifactCache:
    """Caches loaded databases and forests keyed by file identity.

    Identity is (absolute path, mtime_ns, size), so an artifact rebuilt
    in place is picked up on the next request; an unchanged file costs
    one os.stat per request.
    """

    def __init__(self) -> None:
        self._databases: dict[str, tuple[tuple[int, int], FactorDatabase]] = {}
        self._forests: dict[str, tuple[tuple[int, int], RandomForest]] = {}

    @staticmethod
    def _identity(path: str) -> tuple[str, tuple[int, int]]:
        full = os.path.abspath(path)
        st = os.stat(full)
        return full, (st.st_mtime_ns, st.st_size)

    def database(self, path: str, gate_set: GateSet) -> FactorDatabase:
        full, stamp = self._identity(path)
        hit = self._databases.get(full)
        if hit is not None and hit[0] == stamp:
            db = hit[1]
            # The cached copy may have been loaded against a different
            # gate set; re-check the fingerprint on every hit.
            if db.fingerprint != gate_set.fingerprint():
                raise ValueError(
                    "factorization database was built for a different gate set")
            return db
        db = load_database(full, gate_set)
        self._databases[full] = (stamp, db)
        return db

    def forest(self, path: str) -> RandomForest:
        full, stamp = self._identity(path)
        hit = self._forests.get(full)
        if hit is not None and hit[0] == stamp:
            return hit[1]
        forest = load_forest(full)
        self._forests[full] = (stamp, forest)
        return forest
