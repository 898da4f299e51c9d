"""File formats and synthetic dataset generators.

Matrices travel either as comma-separated text (17 significant digits, so
float64 round-trips exactly) or as the NCM1 binary block: magic ``NCM1``,
u32 version 1, u64 rows, u64 cols, then row-major little-endian float64.

Trained models are stored in the NCCM container: magic ``NCCM``, u32
version 1, u8 method id (1 linear, 2 partially linear, 3 nonparametric),
u32 section count, then named sections.  Each section is a u32 name length,
the UTF-8 name, a u8 payload kind, and the payload:

=====  ==============================================================
kind   payload
=====  ==============================================================
0      dense matrix, a complete NCM1 block
1      sparse CSR: u64 rows, cols, nnz; u64 row offsets (rows+1);
       u64 column indices (nnz); float64 values (nnz)
2      scalar list: u32 count, float64 values
3      UTF-8 string: u32 byte length, bytes
=====  ==============================================================

All integers are little-endian.  Loading a saved model reproduces its
projections bit for bit.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .affinity import AffinityConfig
from .cca import CcaModel
from .ncca import NccaConfig, NccaModel
from .plcca import PlccaModel

__all__ = [
    "FormatError",
    "PairedDataset",
    "read_matrix",
    "write_matrix",
    "save_model",
    "load_model",
    "gen_gaussian_pair",
    "gen_spiral_pair",
    "gen_identical_views",
]

MATRIX_MAGIC = b"NCM1"
MODEL_MAGIC = b"NCCM"
FORMAT_VERSION = 1

_METHOD_IDS = {"cca": 1, "plcca": 2, "ncca": 3}


class FormatError(ValueError):
    """Malformed, truncated, or wrong-version file content."""


@dataclass
class PairedDataset:
    """Two aligned sample matrices plus optional per-sample ground truth."""

    X: np.ndarray
    Y: np.ndarray
    labels: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# matrix files


def _matrix_to_bytes(M):
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("matrix must be 2-D")
    out = io.BytesIO()
    out.write(MATRIX_MAGIC)
    out.write(struct.pack("<IQQ", FORMAT_VERSION, M.shape[0], M.shape[1]))
    out.write(M.astype("<f8", copy=False).tobytes())
    return out.getvalue()


def _matrix_from_stream(f, where="matrix data"):
    header = f.read(4 + 4 + 8 + 8)
    if len(header) < 24 or header[:4] != MATRIX_MAGIC:
        raise FormatError(f"bad magic in {where}: expected NCM1 header")
    version, rows, cols = struct.unpack("<IQQ", header[4:])
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported matrix format version {version} in {where}")
    count = rows * cols
    payload = f.read(count * 8)
    if len(payload) != count * 8:
        raise FormatError(f"truncated {where}: expected {count} float64 values")
    M = np.frombuffer(payload, dtype="<f8").reshape(rows, cols).astype(np.float64)
    if not np.all(np.isfinite(M)):
        raise FormatError(f"non-finite values in {where}")
    return M


def _read_text_matrix(path):
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                values = [float(tok) for tok in line.split(",")]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: unparseable number ({exc})") from None
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise FormatError(
                    f"{path}:{lineno}: ragged row ({len(values)} values, expected {width})"
                )
            rows.append(values)
    M = np.array(rows, dtype=np.float64) if rows else np.zeros((0, 0))
    if not np.all(np.isfinite(M)):
        raise FormatError(f"{path}: non-finite values")
    return M


def read_matrix(path, format="auto"):
    """Read a matrix file; ``format`` is "auto", "text", or "binary"."""
    if format == "auto":
        with open(path, "rb") as f:
            format = "binary" if f.read(4) == MATRIX_MAGIC else "text"
    if format == "binary":
        with open(path, "rb") as f:
            return _matrix_from_stream(f, where=str(path))
    if format == "text":
        return _read_text_matrix(path)
    raise ValueError(f"unknown matrix format {format!r}")


def write_matrix(path, M, format="binary"):
    """Write a matrix file in the chosen on-disk format."""
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("matrix must be 2-D")
    if format == "binary":
        with open(path, "wb") as f:
            f.write(_matrix_to_bytes(M))
    elif format == "text":
        with open(path, "w", encoding="utf-8") as f:
            for row in M:
                f.write(",".join(f"{v:.17g}" for v in row))
                f.write("\n")
    else:
        raise ValueError(f"unknown matrix format {format!r}")


# ---------------------------------------------------------------------------
# model container


def _write_section(out, name, kind, payload):
    encoded = name.encode("utf-8")
    out.write(struct.pack("<I", len(encoded)))
    out.write(encoded)
    out.write(struct.pack("<B", kind))
    out.write(payload)


def _sec_dense(out, name, arr):
    _write_section(out, name, 0, _matrix_to_bytes(np.atleast_2d(arr)))
    return 1


def _sec_sparse(out, name, W):
    W = sp.csr_matrix(W)
    W.sort_indices()
    payload = io.BytesIO()
    payload.write(struct.pack("<QQQ", W.shape[0], W.shape[1], W.nnz))
    payload.write(W.indptr.astype("<u8").tobytes())
    payload.write(W.indices.astype("<u8").tobytes())
    payload.write(W.data.astype("<f8").tobytes())
    _write_section(out, name, 1, payload.getvalue())
    return 1


def _sec_scalars(out, name, values):
    values = np.asarray(values, dtype=np.float64).ravel()
    _write_section(out, name, 2, struct.pack("<I", values.size) + values.astype("<f8").tobytes())
    return 1


def _sec_string(out, name, text):
    encoded = text.encode("utf-8")
    _write_section(out, name, 3, struct.pack("<I", len(encoded)) + encoded)
    return 1


def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated model file while reading {what}")
    return data


def _read_sections(f, count, path):
    sections = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", _read_exact(f, 4, "section name length"))
        name = _read_exact(f, name_len, "section name").decode("utf-8")
        (kind,) = struct.unpack("<B", _read_exact(f, 1, "section kind"))
        if kind == 0:
            value = _matrix_from_stream(f, where=f"section {name!r} of {path}")
        elif kind == 1:
            rows, cols, nnz = struct.unpack("<QQQ", _read_exact(f, 24, "sparse header"))
            indptr = np.frombuffer(_read_exact(f, 8 * (rows + 1), "row offsets"), dtype="<u8")
            indices = np.frombuffer(_read_exact(f, 8 * nnz, "column indices"), dtype="<u8")
            data = np.frombuffer(_read_exact(f, 8 * nnz, "values"), dtype="<f8")
            value = sp.csr_matrix(
                (data.astype(np.float64), indices.astype(np.int64), indptr.astype(np.int64)),
                shape=(rows, cols),
            )
        elif kind == 2:
            (n_vals,) = struct.unpack("<I", _read_exact(f, 4, "scalar count"))
            value = np.frombuffer(
                _read_exact(f, 8 * n_vals, "scalar values"), dtype="<f8"
            ).astype(np.float64)
        elif kind == 3:
            (n_bytes,) = struct.unpack("<I", _read_exact(f, 4, "string length"))
            value = _read_exact(f, n_bytes, "string payload").decode("utf-8")
        else:
            raise FormatError(f"unknown section kind {kind} in {path}")
        sections[name] = value
    return sections


def _require(sections, name, path):
    if name not in sections:
        raise FormatError(f"model file {path} is missing required section {name!r}")
    return sections[name]


def _affinity_to_scalars(cfg: AffinityConfig):
    sigma = cfg.sigma if cfg.sigma is not None else -1.0
    return [sigma, float(cfg.k), cfg.fraction, 1.0 if cfg.mutual else 0.0]


def _affinity_from_scalars(vals):
    sigma = None if vals[0] < 0 else float(vals[0])
    return AffinityConfig(sigma=sigma, k=int(vals[1]), fraction=float(vals[2]), mutual=bool(vals[3]))


def save_model(path, model):
    """Serialize a fitted model to an NCCM container file."""
    out = io.BytesIO()
    body = io.BytesIO()
    if isinstance(model, CcaModel):
        method = _METHOD_IDS["cca"]
        n = 0
        n += _sec_dense(body, "mean_x", model.mean_x)
        n += _sec_dense(body, "mean_y", model.mean_y)
        n += _sec_dense(body, "w1", model.W1)
        n += _sec_dense(body, "w2", model.W2)
        n += _sec_scalars(body, "correlations", model.correlations)
        n += _sec_scalars(body, "ridge", [model.ridge_x, model.ridge_y])
    elif isinstance(model, PlccaModel):
        method = _METHOD_IDS["plcca"]
        n = 0
        n += _sec_dense(body, "mean_x", model.mean_x)
        n += _sec_dense(body, "whitener", model.whitener)
        n += _sec_dense(body, "u", model.U)
        n += _sec_scalars(body, "d", model.D)
        n += _sec_dense(body, "xhat_mean", model.xhat_mean)
        n += _sec_scalars(body, "ridge", [model.ridge])
        n += _sec_string(body, "predictor", model.predictor)
        if model.predictor == "nw":
            n += _sec_dense(body, "train_x", model.train_X)
            n += _sec_dense(body, "train_y", model.train_Y)
            n += _sec_scalars(body, "y_affinity", _affinity_to_scalars(model.y_affinity))
        else:
            n += _sec_dense(body, "linear_coef", model.linear_coef)
            n += _sec_dense(body, "mean_y", model.mean_y)
        if model.pca_x is not None:
            n += _sec_dense(body, "pca_x_mean", model.pca_x[0])
            n += _sec_dense(body, "pca_x_basis", model.pca_x[1])
        if model.pca_y is not None:
            n += _sec_dense(body, "pca_y_mean", model.pca_y[0])
            n += _sec_dense(body, "pca_y_basis", model.pca_y[1])
    elif isinstance(model, NccaModel):
        method = _METHOD_IDS["ncca"]
        cfg = model.config
        n = 0
        n += _sec_dense(body, "train_x", model.train_x)
        n += _sec_sparse(body, "wy", model.Wy)
        n += _sec_scalars(body, "sigmas", model.sigmas)
        n += _sec_dense(body, "f", model.F)
        n += _sec_dense(body, "g", model.G)
        n += _sec_scalars(
            body,
            "config",
            [
                float(cfg.L),
                float(cfg.seed),
                float(cfg.oversample),
                float(cfg.power_iters),
                cfg.sigma1_tolerance,
                1.0 if cfg.bidirectional else 0.0,
                cfg.svd_rtol,
                -1.0 if cfg.score_row_cap is None else float(cfg.score_row_cap),
            ],
        )
        n += _sec_string(body, "svd", cfg.svd)
        n += _sec_scalars(body, "affinity_x", _affinity_to_scalars(cfg.affinity_x))
        n += _sec_scalars(body, "affinity_y", _affinity_to_scalars(cfg.affinity_y))
        if model.pca_x is not None:
            n += _sec_dense(body, "pca_x_mean", model.pca_x[0])
            n += _sec_dense(body, "pca_x_basis", model.pca_x[1])
        if cfg.bidirectional:
            n += _sec_dense(body, "train_y", model.train_y)
            n += _sec_sparse(body, "wx", model.Wx)
            if model.pca_y is not None:
                n += _sec_dense(body, "pca_y_mean", model.pca_y[0])
                n += _sec_dense(body, "pca_y_basis", model.pca_y[1])
    else:
        raise ValueError(f"cannot serialize object of type {type(model).__name__}")

    out.write(MODEL_MAGIC)
    out.write(struct.pack("<IBI", FORMAT_VERSION, method, n))
    out.write(body.getvalue())
    with open(path, "wb") as f:
        f.write(out.getvalue())


def load_model(path):
    """Load a model saved by :func:`save_model`."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MODEL_MAGIC:
            raise FormatError(f"{path}: bad magic, not an NCCM model file")
        version, method, count = struct.unpack("<IBI", _read_exact(f, 9, "model header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported model format version {version}")
        sections = _read_sections(f, count, path)

    if method == _METHOD_IDS["cca"]:
        ridge = _require(sections, "ridge", path)
        return CcaModel(
            mean_x=_require(sections, "mean_x", path).ravel(),
            mean_y=_require(sections, "mean_y", path).ravel(),
            W1=_require(sections, "w1", path),
            W2=_require(sections, "w2", path),
            correlations=_require(sections, "correlations", path),
            ridge_x=float(ridge[0]),
            ridge_y=float(ridge[1]),
        )
    if method == _METHOD_IDS["plcca"]:
        predictor = _require(sections, "predictor", path)
        model = PlccaModel(
            mean_x=_require(sections, "mean_x", path).ravel(),
            whitener=_require(sections, "whitener", path),
            U=_require(sections, "u", path),
            D=_require(sections, "d", path),
            xhat_mean=_require(sections, "xhat_mean", path).ravel(),
            ridge=float(_require(sections, "ridge", path)[0]),
            predictor=predictor,
        )
        if predictor == "nw":
            model.train_X = _require(sections, "train_x", path)
            model.train_Y = _require(sections, "train_y", path)
            model.y_affinity = _affinity_from_scalars(_require(sections, "y_affinity", path))
        elif predictor == "linear":
            model.linear_coef = _require(sections, "linear_coef", path)
            model.mean_y = _require(sections, "mean_y", path).ravel()
        else:
            raise FormatError(f"{path}: unknown predictor kind {predictor!r}")
        if "pca_x_mean" in sections:
            model.pca_x = (sections["pca_x_mean"].ravel(), _require(sections, "pca_x_basis", path))
        if "pca_y_mean" in sections:
            model.pca_y = (sections["pca_y_mean"].ravel(), _require(sections, "pca_y_basis", path))
        return model
    if method == _METHOD_IDS["ncca"]:
        raw = _require(sections, "config", path)
        config = NccaConfig(
            L=int(raw[0]),
            affinity_x=_affinity_from_scalars(_require(sections, "affinity_x", path)),
            affinity_y=_affinity_from_scalars(_require(sections, "affinity_y", path)),
            seed=int(raw[1]),
            oversample=int(raw[2]),
            power_iters=int(raw[3]),
            sigma1_tolerance=float(raw[4]),
            svd=_require(sections, "svd", path),
            bidirectional=bool(raw[5]),
            svd_rtol=float(raw[6]),
            score_row_cap=None if raw[7] < 0 else int(raw[7]),
        )
        pca_x = None
        if "pca_x_mean" in sections:
            pca_x = (sections["pca_x_mean"].ravel(), _require(sections, "pca_x_basis", path))
        model = NccaModel(
            train_x=_require(sections, "train_x", path),
            pca_x=pca_x,
            Wy=_require(sections, "wy", path),
            sigmas=_require(sections, "sigmas", path),
            F=_require(sections, "f", path),
            G=_require(sections, "g", path),
            config=config,
        )
        if config.bidirectional:
            model.train_y = _require(sections, "train_y", path)
            model.Wx = _require(sections, "wx", path)
            if "pca_y_mean" in sections:
                model.pca_y = (sections["pca_y_mean"].ravel(), _require(sections, "pca_y_basis", path))
        return model
    raise FormatError(f"{path}: unknown model method id {method}")


# ---------------------------------------------------------------------------
# synthetic datasets


def gen_gaussian_pair(N, correlations, seed=0):
    """Paired Gaussians with prescribed per-coordinate correlations.

    Each view has L standard-normal coordinates; coordinate i of the two
    views has covariance ``correlations[i]`` and cross terms vanish, so the
    population canonical correlations equal the given values.
    """
    rho = np.asarray(correlations, dtype=np.float64).ravel()
    if rho.size < 1:
        raise ValueError("at least one correlation is required")
    if np.any((rho < 0.0) | (rho >= 1.0)):
        raise ValueError(f"correlations must lie in [0, 1), got {rho}")
    rng = np.random.default_rng(seed)
    Z1 = rng.standard_normal((N, rho.size))
    Z2 = rng.standard_normal((N, rho.size))
    X = Z1
    Y = rho * Z1 + np.sqrt(1.0 - rho * rho) * Z2
    return PairedDataset(
        X=X, Y=Y, labels=None, metadata={"kind": "gaussian-pair", "seed": seed, "rho": rho}
    )


def gen_spiral_pair(N, noise=0.01, turns=1.5, seed=0):
    """Spiral-vs-line pair sharing a single degree of freedom.

    A common parameter t ~ Uniform[0, 1) drives both views: view 1 winds it
    onto a planar spiral, view 2 presents it directly next to an independent
    Gaussian nuisance coordinate; both views get isotropic Gaussian noise.
    The shared t is returned as per-sample labels.
    """
    if noise < 0:
        raise ValueError(f"noise must be nonnegative, got {noise}")
    if not turns > 0:
        raise ValueError(f"turns must be positive, got {turns}")
    rng = np.random.default_rng(seed)
    t = rng.random(N)
    angle = 2.0 * np.pi * turns * t
    X = np.column_stack([t * np.cos(angle), t * np.sin(angle)])
    Y = np.column_stack([t, rng.standard_normal(N)])
    X = X + noise * rng.standard_normal(X.shape)
    Y = Y + noise * rng.standard_normal(Y.shape)
    return PairedDataset(
        X=X,
        Y=Y,
        labels=t.reshape(-1, 1),
        metadata={"kind": "spiral-pair", "seed": seed, "noise": noise, "turns": turns},
    )


def gen_identical_views(N, D, seed=0):
    """Both views are the same standard Gaussian sample (trivial-case oracle)."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((N, D))
    return PairedDataset(
        X=X, Y=X.copy(), labels=None, metadata={"kind": "identical-views", "seed": seed}
    )
