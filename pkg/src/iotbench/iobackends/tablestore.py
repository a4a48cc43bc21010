"""Partitioned table stores standing in for a cloud table service.

Rows are addressed by (partition_key, row_key) and carry an attribute map.
The file-backed store uses SQLite with one table ``rows(tbl, pk, rk, body)``
where ``body`` is the JSON-encoded attribute map; tables are registered in
``tables(name)``.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass
from typing import Optional, Protocol

from .errors import BackendUnavailable, TableNotFound


@dataclass(frozen=True)
class TableQuerySpec:
    table: str
    partition_key: str
    row_key: Optional[str] = None


class TableStore(Protocol):
    def create_table(self, table: str) -> None: ...

    def insert(self, table: str, partition_key: str, row_key: str, fields: dict) -> None: ...

    def query(self, spec: TableQuerySpec) -> dict: ...


class MemoryTableStore:
    def __init__(self) -> None:
        self._tables: dict[str, dict[tuple[str, str], dict]] = {}
        self._lock = threading.Lock()
        self.available = True

    def _check(self) -> None:
        if not self.available:
            raise BackendUnavailable("memory table store marked unavailable")

    def create_table(self, table: str) -> None:
        self._check()
        with self._lock:
            self._tables.setdefault(table, {})

    def insert(self, table: str, partition_key: str, row_key: str, fields: dict) -> None:
        self._check()
        with self._lock:
            try:
                self._tables[table][(partition_key, row_key)] = dict(fields)
            except KeyError:
                raise TableNotFound(f"no table {table!r}") from None

    def query(self, spec: TableQuerySpec) -> dict:
        """The addressed row's attributes; ``{}`` when absent.

        Without a row key the first row of the partition (by row key) is returned.
        """
        self._check()
        with self._lock:
            try:
                rows = self._tables[spec.table]
            except KeyError:
                raise TableNotFound(f"no table {spec.table!r}") from None
            if spec.row_key is not None:
                return dict(rows.get((spec.partition_key, spec.row_key), {}))
            keys = sorted(rk for pk, rk in rows if pk == spec.partition_key)
            return dict(rows[(spec.partition_key, keys[0])]) if keys else {}


class SqliteTableStore:
    def __init__(self, path) -> None:
        self.path = str(path)
        self._lock = threading.Lock()
        try:
            self._db = sqlite3.connect(self.path, check_same_thread=False)
            with self._db:
                self._db.execute("CREATE TABLE IF NOT EXISTS tables (name TEXT PRIMARY KEY)")
                self._db.execute(
                    "CREATE TABLE IF NOT EXISTS rows ("
                    "tbl TEXT NOT NULL, pk TEXT NOT NULL, rk TEXT NOT NULL, body TEXT NOT NULL, "
                    "PRIMARY KEY (tbl, pk, rk))"
                )
        except sqlite3.Error as exc:
            raise BackendUnavailable(f"cannot open table store {self.path}: {exc}") from exc

    def _exists(self, table: str) -> bool:
        return self._db.execute("SELECT 1 FROM tables WHERE name = ?", (table,)).fetchone() is not None

    def create_table(self, table: str) -> None:
        with self._lock, self._db:
            self._db.execute("INSERT OR IGNORE INTO tables (name) VALUES (?)", (table,))

    def insert(self, table: str, partition_key: str, row_key: str, fields: dict) -> None:
        body = json.dumps(fields, sort_keys=True)
        try:
            with self._lock, self._db:
                if not self._exists(table):
                    raise TableNotFound(f"no table {table!r}")
                self._db.execute(
                    "INSERT OR REPLACE INTO rows (tbl, pk, rk, body) VALUES (?, ?, ?, ?)",
                    (table, partition_key, row_key, body),
                )
        except sqlite3.OperationalError as exc:
            raise BackendUnavailable(str(exc)) from exc

    def insert_many(self, table: str, rows) -> None:
        """Bulk insert of (partition_key, row_key, fields) triples."""
        try:
            with self._lock, self._db:
                if not self._exists(table):
                    raise TableNotFound(f"no table {table!r}")
                self._db.executemany(
                    "INSERT OR REPLACE INTO rows (tbl, pk, rk, body) VALUES (?, ?, ?, ?)",
                    ((table, pk, rk, json.dumps(f, sort_keys=True)) for pk, rk, f in rows),
                )
        except sqlite3.OperationalError as exc:
            raise BackendUnavailable(str(exc)) from exc

    def query(self, spec: TableQuerySpec) -> dict:
        try:
            with self._lock:
                if not self._exists(spec.table):
                    raise TableNotFound(f"no table {spec.table!r}")
                if spec.row_key is not None:
                    row = self._db.execute(
                        "SELECT body FROM rows WHERE tbl = ? AND pk = ? AND rk = ?",
                        (spec.table, spec.partition_key, spec.row_key),
                    ).fetchone()
                else:
                    row = self._db.execute(
                        "SELECT body FROM rows WHERE tbl = ? AND pk = ? ORDER BY rk LIMIT 1",
                        (spec.table, spec.partition_key),
                    ).fetchone()
        except sqlite3.OperationalError as exc:
            raise BackendUnavailable(str(exc)) from exc
        return json.loads(row[0]) if row else {}

    def close(self) -> None:
        self._db.close()
