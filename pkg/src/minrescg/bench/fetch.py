"""Download test matrices from the SuiteSparse collection into a local cache.

The collection does not publish checksums alongside its tarballs, so a
file's SHA-256 is recorded on first download (``hashes.json`` in the cache)
and checked on every later use. Each download is also parsed and its
dimension and nonzero count compared with the known values.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
import tarfile
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from ..errors import FetchError
from ..sparse import load_matrix_market

__all__ = ["KNOWN_MATRICES", "MatrixInfo", "default_cache_dir", "fetch_matrix", "resolve_matrix_id"]

log = logging.getLogger(__name__)

CACHE_ENV = "MINRESCG_CACHE"
OFFLINE_ENV = "MINRESCG_OFFLINE"
MIRROR_ENV = "MINRESCG_MIRROR"
DEFAULT_MIRROR = "https://sparse.tamu.edu"
TIMEOUT = 60


@dataclass(frozen=True)
class MatrixInfo:
    group: str
    name: str
    n: int
    nnz: int
    k: int


KNOWN_MATRICES = {
    "bcsstm10": MatrixInfo("HB", "bcsstm10", 1086, 22092, 54),
    "bcsstm27": MatrixInfo("HB", "bcsstm27", 1224, 56126, 31),
    "nasa1824": MatrixInfo("Nasa", "nasa1824", 1824, 39208, 20),
    "meg4": MatrixInfo("HB", "meg4", 5860, 25258, 54),
    "benzene": MatrixInfo("PARSEC", "benzene", 8219, 242669, 2),
    "si10h16": MatrixInfo("PARSEC", "Si10H16", 17077, 875923, 41),
    "si5h12": MatrixInfo("PARSEC", "Si5H12", 19898, 738598, 6),
    "sio": MatrixInfo("PARSEC", "SiO", 33401, 1317655, 8),
}


def resolve_matrix_id(name: str) -> MatrixInfo:
    key = name.strip().lower()
    if "/" in key:
        key = key.rsplit("/", 1)[1]
    try:
        return KNOWN_MATRICES[key]
    except KeyError:
        known = ", ".join(info.name for info in KNOWN_MATRICES.values())
        raise FetchError(f"unknown matrix id {name!r}; known ids: {known}") from None


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "minrescg"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _load_hashes(cache: Path) -> dict:
    p = cache / "hashes.json"
    if p.exists():
        return json.loads(p.read_text())
    return {}


def _store_hash(cache: Path, name: str, digest: str) -> None:
    hashes = _load_hashes(cache)
    hashes[name] = digest
    tmp = cache / "hashes.json.tmp"
    tmp.write_text(json.dumps(hashes, indent=2, sort_keys=True))
    tmp.replace(cache / "hashes.json")


def _download(info: MatrixInfo, dest: Path) -> None:
    mirror = os.environ.get(MIRROR_ENV, DEFAULT_MIRROR).rstrip("/")
    url = f"{mirror}/MM/{info.group}/{info.name}.tar.gz"
    log.info("downloading %s", url)
    try:
        with urllib.request.urlopen(url, timeout=TIMEOUT) as resp:
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise FetchError(f"{url}: HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"{url}: {exc}") from exc
    member_name = f"{info.name}/{info.name}.mtx"
    try:
        with tarfile.open(fileobj=io.BytesIO(payload), mode="r:gz") as tar:
            member = tar.extractfile(member_name)
            if member is None:
                raise KeyError(member_name)
            data = member.read()
    except (tarfile.TarError, KeyError) as exc:
        raise FetchError(f"{url}: archive does not contain {member_name}") from exc
    tmp = dest.with_suffix(".part")
    tmp.write_bytes(data)
    tmp.replace(dest)


def fetch_matrix(name: str, cache_dir=None, *, offline: bool | None = None) -> Path:
    """Return the local path of a known matrix, downloading it if needed.

    ``offline`` defaults to the ``MINRESCG_OFFLINE`` environment variable; in
    offline mode only the cache is consulted.
    """
    info = resolve_matrix_id(name)
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    if offline is None:
        offline = os.environ.get(OFFLINE_ENV, "") not in ("", "0", "false", "no")
    path = cache / f"{info.name}.mtx"
    recorded = _load_hashes(cache).get(info.name) if cache.exists() else None
    if path.exists():
        digest = _sha256(path)
        if recorded is not None and digest != recorded:
            raise FetchError(f"{path}: content hash {digest[:12]} does not match recorded {recorded[:12]}")
        if recorded is None:
            _verify_shape(info, path)
            _store_hash(cache, info.name, digest)
        return path
    if offline:
        raise FetchError(f"{info.name} is not in the cache {cache} and offline mode is on")
    cache.mkdir(parents=True, exist_ok=True)
    _download(info, path)
    try:
        _verify_shape(info, path)
    except FetchError:
        path.unlink(missing_ok=True)
        raise
    digest = _sha256(path)
    if recorded is not None and digest != recorded:
        path.unlink(missing_ok=True)
        raise FetchError(f"downloaded {info.name} has hash {digest[:12]}, recorded {recorded[:12]}")
    _store_hash(cache, info.name, digest)
    return path


def _verify_shape(info: MatrixInfo, path: Path) -> None:
    A = load_matrix_market(path)
    if A.n != info.n or A.nnz != info.nnz:
        raise FetchError(f"{path}: got n={A.n}, nnz={A.nnz}; expected n={info.n}, nnz={info.nnz}")
