"""Object stores standing in for a cloud blob service.

The directory backend lays objects out as ``<root>/<container>/<key>``; keys
may contain ``/`` to form sub-directories but may not escape the container.
"""

from __future__ import annotations

import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import Protocol

from .errors import BackendUnavailable, ObjectNotFound


@dataclass(frozen=True)
class ObjectStoreRef:
    container: str
    key: str

    def __post_init__(self) -> None:
        if not self.container or "/" in self.container or self.container in (".", ".."):
            raise ValueError(f"bad container name {self.container!r}")
        p = PurePosixPath(self.key)
        if not self.key or p.is_absolute() or any(part in ("..", ".") for part in p.parts):
            raise ValueError(f"bad object key {self.key!r}")

    def __str__(self) -> str:
        return f"{self.container}/{self.key}"


class ObjectStore(Protocol):
    def put(self, ref: ObjectStoreRef, data: bytes) -> None: ...

    def get(self, ref: ObjectStoreRef) -> bytes: ...

    def exists(self, ref: ObjectStoreRef) -> bool: ...

    def list(self, container: str, prefix: str = "") -> list[str]: ...


class MemoryObjectStore:
    def __init__(self) -> None:
        self._objects: dict[tuple[str, str], bytes] = {}
        self._lock = threading.Lock()
        self.available = True

    def _check(self) -> None:
        if not self.available:
            raise BackendUnavailable("memory object store marked unavailable")

    def put(self, ref: ObjectStoreRef, data: bytes) -> None:
        self._check()
        with self._lock:
            self._objects[(ref.container, ref.key)] = bytes(data)

    def get(self, ref: ObjectStoreRef) -> bytes:
        self._check()
        with self._lock:
            try:
                return self._objects[(ref.container, ref.key)]
            except KeyError:
                raise ObjectNotFound(f"no object {ref}") from None

    def exists(self, ref: ObjectStoreRef) -> bool:
        self._check()
        with self._lock:
            return (ref.container, ref.key) in self._objects

    def list(self, container: str, prefix: str = "") -> list[str]:
        self._check()
        with self._lock:
            return sorted(k for c, k in self._objects if c == container and k.startswith(prefix))


class LocalObjectStore:
    """Directory-tree object store. Writes are atomic (temp file + rename)."""

    def __init__(self, root) -> None:
        self.root = Path(root)

    def path(self, ref: ObjectStoreRef) -> Path:
        return self.root / ref.container / PurePosixPath(ref.key)

    def put(self, ref: ObjectStoreRef, data: bytes) -> None:
        dest = self.path(ref)
        try:
            dest.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=dest.parent, prefix=".upload-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, dest)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        except OSError as exc:
            raise BackendUnavailable(f"cannot write {ref}: {exc}") from exc

    def get(self, ref: ObjectStoreRef) -> bytes:
        try:
            return self.path(ref).read_bytes()
        except (FileNotFoundError, IsADirectoryError, NotADirectoryError):
            raise ObjectNotFound(f"no object {ref}") from None
        except OSError as exc:
            raise BackendUnavailable(f"cannot read {ref}: {exc}") from exc

    def exists(self, ref: ObjectStoreRef) -> bool:
        return self.path(ref).is_file()

    def list(self, container: str, prefix: str = "") -> list[str]:
        base = self.root / container
        if not base.is_dir():
            return []
        keys = (p.relative_to(base).as_posix() for p in base.rglob("*") if p.is_file())
        return sorted(k for k in keys if k.startswith(prefix) and not k.rsplit("/", 1)[-1].startswith(".upload-"))
