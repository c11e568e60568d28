"""Finite-mode model systems: a Hermitian one-body matrix T and a two-body
tensor W with bosonic symmetries, plus generators, validation and a lossless
JSON file format (``*.model.json``).

Tensor conventions. ``W[(m, n, p, q)]`` is the two-body matrix element with
incoming legs (p, q) and outgoing legs (m, n). Stored tensors must satisfy

* exchange symmetry  W[m,n,p,q] == W[n,m,q,p]
* Hermiticity        W[m,n,p,q] == conj(W[p,q,m,n])

and be real (with T symmetric) when ``is_real`` is set. Generators produce
orbit-closed dictionaries that satisfy these identities bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelFormatError, ValidationError

WKey = tuple[int, int, int, int]


def _orbit(key: WKey):
    """The symmetry orbit of an index tuple: exchange and Hermitian images.

    Returns ((key, conjugate?), ...) where conjugate marks entries whose value
    is the complex conjugate of W[key].
    """
    m, n, p, q = key
    return (
        ((m, n, p, q), False),
        ((n, m, q, p), False),
        ((p, q, m, n), True),
        ((q, p, n, m), True),
    )


def canonical_key(key: WKey) -> tuple[WKey, bool]:
    """Lexicographically smallest orbit member and whether it is conjugated."""
    best, conj = min(_orbit(key))
    return best, conj


class ModelSystem:
    """Discrete (T, W) system on ``M`` modes.

    ``W`` is a dict mapping index tuples to values; missing entries are zero.
    The constructor does not symmetrize -- use :func:`validate_model` to check
    the invariants, or ``symmetrize=True`` to average over each orbit.
    """

    def __init__(self, name: str, T: np.ndarray, W: dict, is_real: bool,
                 symmetrize: bool = False):
        T = np.asarray(T)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ValidationError(f"T must be square, got shape {T.shape}")
        M = T.shape[0]
        if M < 2:
            raise ValidationError(f"mode count must be >= 2, got M={M}")
        for key in W:
            if len(key) != 4 or not all(0 <= i < M for i in key):
                raise ValidationError(f"W index {key} out of range for M={M}")
        if symmetrize:
            W = symmetrize_tensor(W)
        self.name = str(name)
        self.M = M
        self.T = T.astype(np.float64 if is_real else np.complex128)
        self.W = {tuple(int(i) for i in k): v for k, v in W.items() if v != 0}
        self.is_real = bool(is_real)
        self._w_arrays = None

    def w_arrays(self):
        """(idx, vals) arrays over the stored nonzeros, in sorted key order."""
        if self._w_arrays is None:
            keys = sorted(self.W)
            idx = np.array(keys, dtype=np.int64).reshape(len(keys), 4)
            dtype = np.float64 if self.is_real else np.complex128
            vals = np.array([self.W[k] for k in keys], dtype=dtype)
            self._w_arrays = (idx, vals)
        return self._w_arrays

    def w_dense(self) -> np.ndarray:
        dtype = np.float64 if self.is_real else np.complex128
        w = np.zeros((self.M,) * 4, dtype=dtype)
        for k, v in self.W.items():
            w[k] = v
        return w

    def equals_exact(self, other: "ModelSystem") -> bool:
        return (
            self.M == other.M
            and self.is_real == other.is_real
            and self.T.shape == other.T.shape
            and np.array_equal(self.T, other.T)
            and self.W == other.W
        )


def symmetrize_tensor(W: dict) -> dict:
    """Average each orbit so the symmetry invariants hold exactly."""
    out: dict = {}
    seen = set()
    for key in W:
        can, _ = canonical_key(key)
        if can in seen:
            continue
        seen.add(can)
        acc = 0.0
        for k, conj in _orbit(can):
            v = W.get(k, 0.0)
            acc += np.conj(v) if conj else v
        val = acc / 4.0
        if val == 0:
            continue
        for k, conj in _orbit(can):
            out[k] = np.conj(val) if conj else val
    return out


@dataclass
class ValidationReport:
    hermiticity_residual_T: float
    symmetry_residual_W: float
    hermiticity_residual_W: float
    passed: bool

    TOL = 1e-10


def validate_model(m: ModelSystem) -> ValidationReport:
    """Maximum violation of each structural invariant; never raises."""
    t_res = float(np.abs(m.T - m.T.conj().T).max(initial=0.0))
    if m.is_real:
        t_imag = float(np.abs(np.imag(m.T)).max(initial=0.0))
        t_res = max(t_res, t_imag, float(np.abs(m.T - m.T.T).max(initial=0.0)))
    sym_res = 0.0
    herm_res = 0.0
    for (mm, nn, pp, qq), v in m.W.items():
        sym_res = max(sym_res, abs(v - m.W.get((nn, mm, qq, pp), 0.0)))
        herm_res = max(herm_res, abs(v - np.conj(m.W.get((pp, qq, mm, nn), 0.0))))
        if m.is_real:
            herm_res = max(herm_res, abs(np.imag(v)))
    passed = max(t_res, sym_res, herm_res) <= ValidationReport.TOL
    return ValidationReport(t_res, sym_res, herm_res, passed)


def lattice_gas(L: int, J: float, w_hat) -> ModelSystem:
    """Translation-invariant gas on ``L`` momentum modes.

    Mode p carries energy 2J(1 - cos(2 pi p / L)); mode 0 is zero momentum.
    W[m,n,p,q] = w_hat[(m-p) mod L] / L on momentum-conserving index tuples.
    ``w_hat`` must be even (w_hat[k] == w_hat[L-k]) and nonnegative, which is
    what guarantees condensation on the zero-momentum mode.
    """
    w_hat = list(w_hat)
    if L < 2:
        raise ValidationError("lattice_gas needs L >= 2")
    if len(w_hat) != L:
        raise ValidationError(f"w_hat must have length L={L}, got {len(w_hat)}")
    if J < 0:
        raise ValidationError("hopping J must be >= 0")
    for k in range(L):
        if w_hat[k] != w_hat[(L - k) % L]:
            raise ValidationError(
                f"w_hat must be even: w_hat[{k}]={w_hat[k]!r} != "
                f"w_hat[{(L - k) % L}]={w_hat[(L - k) % L]!r}"
            )
        if w_hat[k] < 0:
            raise ValidationError(f"w_hat[{k}] = {w_hat[k]!r} is negative")
    eps = [2.0 * J * (1.0 - math.cos(2.0 * math.pi * p / L)) for p in range(L)]
    T = np.diag(np.array(eps, dtype=np.float64))
    W: dict = {}
    for m in range(L):
        for n in range(L):
            for p in range(L):
                q = (m + n - p) % L
                v = w_hat[(m - p) % L] / L
                if v != 0.0:
                    W[(m, n, p, q)] = v
    return ModelSystem(f"lattice_gas_L{L}", T, W, is_real=True)


def separable_gas(M: int, t_diag, form_factors) -> ModelSystem:
    """Diagonal T plus a sum of separable two-body couplings.

    Each factor (g, v) contributes g * conj(v[m]) v[p] * conj(v[n]) v[q]; the
    bosonic symmetries hold by construction.
    """
    t_diag = np.asarray(t_diag)
    if len(t_diag) != M or M < 2:
        raise ValidationError(f"t_diag must have length M={M} >= 2")
    is_real = not np.iscomplexobj(t_diag)
    w = None
    for g, v in form_factors:
        v = np.asarray(v)
        if v.shape != (M,):
            raise ValidationError(f"form factor has shape {v.shape}, expected ({M},)")
        if np.iscomplexobj(v):
            is_real = False
        # pair products via B[m,p] = conj(v_m) v_p keep the symmetry orbit
        # bit-exactly consistent
        b = np.outer(np.conj(v), v)
        wa = float(g) * np.einsum("mp,nq->mnpq", b, b)
        w = wa if w is None else w + wa
    if w is None:
        w = np.zeros((M,) * 4)
    if is_real:
        w = w.real
    T = np.diag(t_diag.astype(np.float64 if is_real else np.complex128))
    W = {tuple(int(i) for i in k): w[tuple(k)] for k in zip(*np.nonzero(w))}
    return ModelSystem(f"separable_gas_M{M}", T, W, is_real=is_real)


# ----------------------------------------------------------------------------
# file format: one JSON document, canonical orbit representatives only
# ----------------------------------------------------------------------------

MODEL_SUFFIX = ".model.json"


def save_model(m: ModelSystem, path) -> None:
    report = validate_model(m)
    if not report.passed:
        raise ValidationError(f"refusing to save an invalid model: {report}")
    seen = set()
    entries = []
    for key in sorted(m.W):
        can, conj = canonical_key(key)
        if can in seen:
            continue
        seen.add(can)
        v = complex(m.W[can])
        entries.append([*can, v.real, v.imag])
    if m.is_real:
        t_list = [float(x) for x in np.real(m.T).ravel()]
    else:
        t_list = [[float(x.real), float(x.imag)] for x in m.T.ravel()]
    doc = {
        "name": m.name,
        "M": m.M,
        "is_real": m.is_real,
        "T": t_list,
        "W": entries,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> ModelSystem:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"{path}: not valid JSON (line {exc.lineno}, column {exc.colno}): "
            f"{exc.msg}"
        ) from exc
    for field in ("name", "M", "is_real", "T", "W"):
        if field not in doc:
            raise ModelFormatError(f"{path}: missing field {field!r}")
    M = doc["M"]
    if not isinstance(M, int) or M < 2:
        raise ValidationError(f"{path}: mode count must be an integer >= 2, got {M!r}")
    is_real = bool(doc["is_real"])
    t_list = doc["T"]
    if len(t_list) != M * M:
        raise ModelFormatError(f"{path}: field 'T' must have {M * M} entries, "
                               f"got {len(t_list)}")
    if is_real:
        T = np.array([float(x) for x in t_list], dtype=np.float64).reshape(M, M)
    else:
        T = np.array([complex(re, im) for re, im in t_list],
                     dtype=np.complex128).reshape(M, M)
    W: dict = {}
    for row, entry in enumerate(doc["W"]):
        if len(entry) != 6:
            raise ModelFormatError(f"{path}: W entry {row} must be "
                                   f"[m,n,p,q,re,im], got {entry!r}")
        key = tuple(int(i) for i in entry[:4])
        can, _ = canonical_key(key)
        if key != can:
            raise ModelFormatError(f"{path}: W entry {row} index {key} is not "
                                   f"the canonical orbit representative {can}")
        if key in W:
            raise ModelFormatError(f"{path}: duplicate W entry for {key}")
        val = complex(float(entry[4]), float(entry[5]))
        if is_real:
            if val.imag != 0.0:
                raise ValidationError(f"{path}: real model has complex W entry "
                                      f"at {key}")
            val = val.real
        for k, conj in _orbit(key):
            W[k] = np.conj(val) if conj else val
    m = ModelSystem(doc["name"], T, W, is_real=is_real)
    report = validate_model(m)
    if not report.passed:
        raise ValidationError(f"{path}: model violates symmetry invariants: {report}")
    return m


# ----------------------------------------------------------------------------
# built-in models used by the study runners and the acceptance suite
# ----------------------------------------------------------------------------

def free_gas() -> ModelSystem:
    """Three noninteracting modes; exactness anchor (W == 0)."""
    m = separable_gas(3, [0.0, 1.0, 1.3], [])
    m.name = "free_gas"
    return m


def contact_condensate() -> ModelSystem:
    """Interaction only within the condensate mode (W[0,0,0,0] = g).

    Every occupation state is an exact eigenstate, and with the level spacing
    chosen here the three lowest levels carry at most one excitation, so the
    quadratic theory reproduces them with zero error at every N.
    """
    g = 0.4
    m = separable_gas(3, [0.0, 1.0, 1.3], [(g, [1.0, 0.0, 0.0])])
    m.name = "contact_condensate"
    return m


def two_mode() -> ModelSystem:
    """Two modes with a genuine pairing interaction; the workhorse model."""
    m = separable_gas(2, [0.0, 1.0], [(0.9, [1.0, 0.8])])
    m.name = "two_mode"
    return m


def lattice4() -> ModelSystem:
    m = lattice_gas(4, 1.0, [0.5, 0.3, 0.2, 0.3])
    m.name = "lattice4"
    return m


BUILTIN_MODELS = {
    "free_gas": free_gas,
    "contact_condensate": contact_condensate,
    "two_mode": two_mode,
    "lattice4": lattice4,
}


def builtin_model(name: str) -> ModelSystem:
    try:
        return BUILTIN_MODELS[name]()
    except KeyError:
        raise ValidationError(
            f"unknown builtin model {name!r}; available: "
            f"{sorted(BUILTIN_MODELS)}"
        ) from None
