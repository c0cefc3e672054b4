import threading
from typing import Iterable, List, Optional, Tuple

from app.tools.simulation import IseRecord
from app.tools.summary import read_records, write_records


class RecordStore:
    """
    ISE records of one run.

    Workers may add concurrently; readers always get the records sorted by
    (distribution, estimator, n, replicate), so the order never depends on
    which worker finished first.
    """

    def __init__(self, records: Optional[Iterable[IseRecord]] = None):
        self._lock = threading.Lock()
        self.history: dict = {}
        if records:
            self.extend(records)

    def add(self, record: IseRecord):
        with self._lock:
            if record.key in self.history:
                raise KeyError(f"duplicate record {record.key}")
            self.history[record.key] = record

    def extend(self, records: Iterable[IseRecord]):
        for record in records:
            self.add(record)

    def get(self) -> List[IseRecord]:
        with self._lock:
            return [self.history[k] for k in sorted(self.history)]

    def get_flagged(self) -> List[IseRecord]:
        return [r for r in self.get() if r.flagged]

    def keys(self) -> List[Tuple[int, int, int, int]]:
        with self._lock:
            return sorted(self.history)

    def __len__(self) -> int:
        return len(self.history)

    def save(self, path: str):
        return write_records(self.get(), path)

    @classmethod
    def load(cls, path: str) -> "RecordStore":
        return cls(read_records(path))

    def clear(self):
        with self._lock:
            self.history = {}
