"""Binary interchange formats.

FDMP (feature dump), little-endian throughout:

    magic    4s   b"FDMP"
    version  u16  1
    flags    u16  bit0 = labels present, bit1 = coords present
    n        u64  record count
    d        u32  feature dimension
    C        u32  class count
    height   u32  grid height (0 for plain record lists)
    width    u32  grid width  (0 for plain record lists)
    domain   u8   0 = LI, 1 = HI

followed by n*d float32 features, n*C float32 probs, then n uint16 labels and
n*2 uint32 coords when the corresponding flag bits are set. Label value
0xFFFF is reserved for "unlabeled". The payload length is fully determined by
the header; trailing bytes are rejected, and a short payload raises a
truncation error before any partial result escapes.

FDBK (fitted banks) shares the endian convention and carries the complete
fitted model: per-domain thresholds and EU banks, the UAR/UAI resolvability
banks, and the optional PCA projector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Union

import numpy as np

from .core import (
    DOMAIN_HI,
    DOMAIN_LI,
    LABEL_MISSING,
    SIMPLEX_ATOL_F32,
    FeatureSet,
    Thresholds,
    check_simplex,
)
from .distance import GaussianBank, NeighborBank, PcaProjector
from .dynamic import BACKEND_KNN, BACKEND_MAHALANOBIS, ResolvabilityBanks
from .errors import (
    BadMagicError,
    MissingFieldError,
    TruncatedFileError,
    ValidationError,
    VersionMismatchError,
)

FDMP_MAGIC = b"FDMP"
FDBK_MAGIC = b"FDBK"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHHQIIIIB")
FLAG_LABELS = 0x1
FLAG_COORDS = 0x2
_LABEL_SENTINEL = 0xFFFF

_DOMAIN_CODE = {DOMAIN_LI: 0, DOMAIN_HI: 1}
_DOMAIN_NAME = {0: DOMAIN_LI, 1: DOMAIN_HI}


def _read_exact(fh: BinaryIO, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFileError(f"file ends inside {what} ({len(data)}/{count} bytes)")
    return data


def _read_array(fh: BinaryIO, dtype: str, shape: tuple, what: str) -> np.ndarray:
    n_bytes = int(np.prod(shape)) * np.dtype(dtype).itemsize
    buf = _read_exact(fh, n_bytes, what)
    return np.frombuffer(buf, dtype=dtype).reshape(shape).copy()


def write_fdmp(data: FeatureSet, path) -> None:
    """Serialize a FeatureSet; float data is stored as little-endian float32."""
    flags = 0
    if data.labels is not None:
        flags |= FLAG_LABELS
    if data.coords is not None:
        flags |= FLAG_COORDS
    header = _HEADER.pack(
        FDMP_MAGIC,
        FORMAT_VERSION,
        flags,
        len(data),
        data.dim,
        data.n_classes,
        data.height,
        data.width,
        _DOMAIN_CODE[data.domain],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(data.features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(data.probs, dtype="<f4").tobytes())
        if data.labels is not None:
            labels = data.labels.copy()
            labels[labels == LABEL_MISSING] = _LABEL_SENTINEL
            fh.write(np.ascontiguousarray(labels, dtype="<u2").tobytes())
        if data.coords is not None:
            fh.write(np.ascontiguousarray(data.coords, dtype="<u4").tobytes())


def read_fdmp(path, validate: bool = True) -> FeatureSet:
    """Parse an FDMP file into a FeatureSet (grid dims preserved).

    Stored float32 payloads are returned exactly as read so that
    write(read(path)) reproduces the file byte for byte.
    """
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise TruncatedFileError(f"file shorter than the {_HEADER.size}-byte header")
        magic, version, flags, n, d, n_classes, height, width, domain = _HEADER.unpack(raw)
        if magic != FDMP_MAGIC:
            raise BadMagicError(f"expected magic {FDMP_MAGIC!r}, found {magic!r}")
        if version != FORMAT_VERSION:
            raise VersionMismatchError(f"unsupported FDMP version {version}")
        if domain not in _DOMAIN_NAME:
            raise ValidationError(f"unknown domain code {domain}")

        features = _read_array(fh, "<f4", (n, d), "features")
        probs = _read_array(fh, "<f4", (n, n_classes), "probs")
        labels = None
        if flags & FLAG_LABELS:
            stored = _read_array(fh, "<u2", (n,), "labels").astype(np.int64)
            stored[stored == _LABEL_SENTINEL] = LABEL_MISSING
            labels = stored
        coords = None
        if flags & FLAG_COORDS:
            coords = _read_array(fh, "<u4", (n, 2), "coords").astype(np.int64)
        if fh.read(1):
            raise TruncatedFileError("trailing bytes after the payload promised by the header")

    if validate:
        if not np.all(np.isfinite(features)):
            raise ValidationError("features contain non-finite entries")
        check_simplex(probs, atol=SIMPLEX_ATOL_F32)
    return FeatureSet(
        features=features,
        probs=probs,
        labels=labels,
        coords=coords,
        domain=_DOMAIN_NAME[domain],
        height=height,
        width=width,
    )


def require_labels(data: FeatureSet) -> np.ndarray:
    """Labels array, or a distinct error when the file carried none."""
    if data.labels is None:
        raise MissingFieldError("labels absent from this feature dump")
    return data.labels


# --- FDBK: fitted model -----------------------------------------------------

_BANK_GAUSSIAN = 0
_BANK_NEIGHBOR = 1
_BACKEND_CODE = {BACKEND_MAHALANOBIS: 0, BACKEND_KNN: 1}
_BACKEND_NAME = {v: k for k, v in _BACKEND_CODE.items()}

Bank = Union[GaussianBank, NeighborBank]


@dataclass
class FittedModel:
    """Everything the taxonomy stage needs, as persisted in an FDBK file."""

    backend: str
    n_classes: int
    li_thresholds: Thresholds
    hi_thresholds: Thresholds
    li_eu_bank: Bank
    hi_eu_bank: Bank
    resolvability: ResolvabilityBanks

    def eu_bank(self, domain: str) -> Bank:
        return self.li_eu_bank if domain == DOMAIN_LI else self.hi_eu_bank

    def thresholds(self, domain: str) -> Thresholds:
        return self.li_thresholds if domain == DOMAIN_LI else self.hi_thresholds


def _write_bank(fh: BinaryIO, bank: Bank) -> None:
    if isinstance(bank, GaussianBank):
        fh.write(struct.pack("<B", _BANK_GAUSSIAN))
        g, d = bank.means.shape
        fh.write(struct.pack("<IId", g, d, bank.shrinkage))
        fh.write(np.ascontiguousarray(bank.group_ids, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(bank.means, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(bank.cov_inv, dtype="<f8").tobytes())
    else:
        fh.write(struct.pack("<B", _BANK_NEIGHBOR))
        n, d = bank.points.shape
        fh.write(struct.pack("<QIIB", n, d, bank.k, int(bank.normalize)))
        fh.write(np.ascontiguousarray(bank.points, dtype="<f8").tobytes())


def _read_bank(fh: BinaryIO) -> Bank:
    (kind,) = struct.unpack("<B", _read_exact(fh, 1, "bank kind"))
    if kind == _BANK_GAUSSIAN:
        g, d, shrinkage = struct.unpack("<IId", _read_exact(fh, 16, "bank header"))
        group_ids = _read_array(fh, "<i8", (g,), "group ids")
        means = _read_array(fh, "<f8", (g, d), "bank means")
        cov_inv = _read_array(fh, "<f8", (d, d), "bank covariance")
        return GaussianBank(means=means, cov_inv=cov_inv, group_ids=group_ids, shrinkage=shrinkage)
    if kind == _BANK_NEIGHBOR:
        n, d, k, normalize = struct.unpack("<QIIB", _read_exact(fh, 17, "bank header"))
        points = _read_array(fh, "<f8", (n, d), "bank points")
        return NeighborBank(points=points, k=k, normalize=bool(normalize))
    raise ValidationError(f"unknown bank kind {kind}")


def write_fdbk(model: FittedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(FDBK_MAGIC)
        fh.write(struct.pack("<H", FORMAT_VERSION))
        fh.write(struct.pack("<BI", _BACKEND_CODE[model.backend], model.n_classes))
        fh.write(
            struct.pack(
                "<dddd",
                model.li_thresholds.tau_eu,
                model.li_thresholds.tau_au,
                model.hi_thresholds.tau_eu,
                model.hi_thresholds.tau_au,
            )
        )
        proj = model.resolvability.projector
        if proj is None:
            fh.write(struct.pack("<II", 0, 0))
        else:
            m, d = proj.components.shape
            fh.write(struct.pack("<II", m, d))
            fh.write(np.ascontiguousarray(proj.mean, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(proj.components, dtype="<f8").tobytes())
        for bank in (
            model.li_eu_bank,
            model.hi_eu_bank,
            model.resolvability.bank_uar,
            model.resolvability.bank_uai,
        ):
            _write_bank(fh, bank)


def read_fdbk(path) -> FittedModel:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != FDBK_MAGIC:
            raise BadMagicError(f"expected magic {FDBK_MAGIC!r}, found {magic!r}")
        (version,) = struct.unpack("<H", _read_exact(fh, 2, "version"))
        if version != FORMAT_VERSION:
            raise VersionMismatchError(f"unsupported FDBK version {version}")
        backend_code, n_classes = struct.unpack("<BI", _read_exact(fh, 5, "backend"))
        if backend_code not in _BACKEND_NAME:
            raise ValidationError(f"unknown backend code {backend_code}")
        backend = _BACKEND_NAME[backend_code]
        li_eu, li_au, hi_eu, hi_au = struct.unpack("<dddd", _read_exact(fh, 32, "thresholds"))
        m, d = struct.unpack("<II", _read_exact(fh, 8, "projector header"))
        projector = None
        if m > 0:
            mean = _read_array(fh, "<f8", (d,), "projector mean")
            components = _read_array(fh, "<f8", (m, d), "projector components")
            projector = PcaProjector(mean=mean, components=components)
        li_bank = _read_bank(fh)
        hi_bank = _read_bank(fh)
        bank_uar = _read_bank(fh)
        bank_uai = _read_bank(fh)
        if fh.read(1):
            raise TruncatedFileError("trailing bytes after the banks payload")
    return FittedModel(
        backend=backend,
        n_classes=n_classes,
        li_thresholds=Thresholds(li_eu, li_au, DOMAIN_LI),
        hi_thresholds=Thresholds(hi_eu, hi_au, DOMAIN_HI),
        li_eu_bank=li_bank,
        hi_eu_bank=hi_bank,
        resolvability=ResolvabilityBanks(
            bank_uar=bank_uar, bank_uai=bank_uai, backend=backend, projector=projector
        ),
    )
