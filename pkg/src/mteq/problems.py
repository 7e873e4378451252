"""Benchmark problem generators and on-disk equation ingestion.

The built-in benchmark discretizes the steady convection-diffusion problem

    -eps * lap(u) + w . grad(u) = 1   on (-1, 1)^2,

with a recirculating wind ``w(x, y) = (2y(1 - x^2), -2x(1 - y^2))``,
homogeneous Dirichlet data except ``u(-1, y) = 1``, and centered finite
differences on a uniform grid. Because the wind components separate into
products of one-variable functions, the discrete operator is a four-term
matrix equation with a rank-2 right-hand side.

Generic equations are exchanged on disk as Matrix Market files tied
together by a JSON manifest.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.io import mmread, mmwrite

from .operator import MultitermEquation


class ManifestError(ValueError):
    """Malformed manifest or matrix file."""


@dataclass(frozen=True)
class ConvDiffSpec:
    """Grid resolution (points per dimension, boundary included) and diffusion coefficient."""

    n: int
    eps: float

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("need at least 4 grid points per dimension")
        if self.eps <= 0:
            raise ValueError("diffusion coefficient must be positive")

    @property
    def h(self) -> float:
        return 2.0 / (self.n - 1)


def build_convdiff(spec: ConvDiffSpec) -> MultitermEquation:
    """Assemble the four-term convection-diffusion matrix equation.

    Dirichlet rows are eliminated, so the coefficient matrices act on the
    ``n - 2`` interior nodes per dimension. Rows index ``x``, columns
    ``y``. The right-hand side collects the unit source and the lifting of
    the inhomogeneous inflow boundary ``u(-1, y) = 1`` into two outer
    products.
    """
    n_int = spec.n - 2
    h = spec.h
    nodes = -1.0 + h * np.arange(1, n_int + 1)

    second = sp.diags(
        [-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n_int, n_int), format="csr"
    ) / h**2
    first = sp.diags(
        [-1.0, 1.0], [-1, 1], shape=(n_int, n_int), format="csr"
    ) / (2.0 * h)
    eye = sp.identity(n_int, format="csr")

    # Wind component factors: w = (phi1(x) psi1(y), phi2(x) psi2(y)).
    phi1 = sp.diags(1.0 - nodes**2)
    psi1 = sp.diags(2.0 * nodes)
    phi2 = sp.diags(-2.0 * nodes)
    psi2 = sp.diags(1.0 - nodes**2)

    a1 = (spec.eps * second).tocsr()
    b2 = (spec.eps * second).tocsr()
    a3 = (phi1 @ first).tocsr()
    b3 = psi1.tocsr()
    a4 = phi2.tocsr()
    b4 = (first.T @ psi2).tocsr()

    ones = np.ones(n_int)
    e_first = np.zeros(n_int)
    e_first[0] = 1.0
    # Boundary lifting at the first interior x-row: the eliminated value
    # u(-1, y) = 1 feeds both the second-difference and the x-advection
    # stencils there.
    phi1_first = 1.0 - nodes[0] ** 2
    lift = spec.eps / h**2 * ones + phi1_first / (2.0 * h) * (2.0 * nodes)

    c = np.column_stack([ones, e_first])
    d = np.column_stack([ones, lift])

    return MultitermEquation(
        terms=[(a1, eye), (eye, b2), (a3, b3), (a4, b4)], C=c, D=d
    )


@dataclass(frozen=True)
class EquationManifest:
    """File layout and metadata of an equation stored on disk."""

    a_paths: tuple[str, ...]
    b_paths: tuple[str, ...]
    c_path: str
    d_path: str
    p: int
    q: int
    n_A: int
    n_B: int
    precond_hints: dict | None = None

    def to_json(self) -> dict:
        return {
            "format": "mteq-manifest",
            "version": 1,
            "p": self.p,
            "q": self.q,
            "n_A": self.n_A,
            "n_B": self.n_B,
            "A": list(self.a_paths),
            "B": list(self.b_paths),
            "C": self.c_path,
            "D": self.d_path,
            "precond_hints": self.precond_hints,
        }

    @classmethod
    def from_json(cls, data: dict) -> "EquationManifest":
        try:
            return cls(
                a_paths=tuple(data["A"]),
                b_paths=tuple(data["B"]),
                c_path=data["C"],
                d_path=data["D"],
                p=int(data["p"]),
                q=int(data["q"]),
                n_A=int(data["n_A"]),
                n_B=int(data["n_B"]),
                precond_hints=data.get("precond_hints"),
            )
        except KeyError as exc:
            raise ManifestError(f"manifest is missing the {exc} entry") from exc


def _read_matrix(path: Path):
    with open(path) as handle:
        banner = handle.readline()
    if not banner.startswith("%%MatrixMarket"):
        raise ManifestError(
            f"{path}:1: not a Matrix Market header (got {banner.strip()!r})"
        )
    try:
        m = mmread(path)
    except ValueError as exc:
        raise ManifestError(f"{path}: failed to parse: {exc}") from exc
    return m.tocsr() if sp.issparse(m) else np.asarray(m, dtype=float)


def save_manifest(eq: MultitermEquation, directory) -> Path:
    """Write an equation as Matrix Market files plus ``manifest.json``.

    Sparse coefficients use coordinate format, dense right-hand-side
    factors use array format; 17 significant digits round-trip doubles
    exactly. Returns the manifest path.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    a_paths, b_paths = [], []
    for i, (a, b) in enumerate(eq.terms, start=1):
        a_name, b_name = f"A_{i}.mtx", f"B_{i}.mtx"
        mmwrite(directory / a_name, sp.coo_matrix(a), precision=17)
        mmwrite(directory / b_name, sp.coo_matrix(b), precision=17)
        a_paths.append(a_name)
        b_paths.append(b_name)
    mmwrite(directory / "C.mtx", eq.C, precision=17)
    mmwrite(directory / "D.mtx", eq.D, precision=17)
    manifest = EquationManifest(
        a_paths=tuple(a_paths),
        b_paths=tuple(b_paths),
        c_path="C.mtx",
        d_path="D.mtx",
        p=eq.p,
        q=eq.q,
        n_A=eq.n_A,
        n_B=eq.n_B,
    )
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest.to_json(), indent=2))
    return path


def load_manifest(path) -> MultitermEquation:
    """Read an equation back from a manifest written by :func:`save_manifest`.

    Validates that every file matches the dimensions recorded in the
    manifest and warns when the right-hand-side factors are numerically
    rank deficient.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON: {exc}") from exc
    manifest = EquationManifest.from_json(data)
    base = path.parent

    if len(manifest.a_paths) != manifest.p or len(manifest.b_paths) != manifest.p:
        raise ManifestError(
            f"{path}: expected {manifest.p} coefficient pairs, found "
            f"{len(manifest.a_paths)} / {len(manifest.b_paths)}"
        )
    terms = []
    for i, (a_rel, b_rel) in enumerate(zip(manifest.a_paths, manifest.b_paths), 1):
        a = _read_matrix(base / a_rel)
        b = _read_matrix(base / b_rel)
        if a.shape != (manifest.n_A, manifest.n_A):
            raise ManifestError(
                f"{base / a_rel}: expected shape "
                f"({manifest.n_A}, {manifest.n_A}), got {a.shape}"
            )
        if b.shape != (manifest.n_B, manifest.n_B):
            raise ManifestError(
                f"{base / b_rel}: expected shape "
                f"({manifest.n_B}, {manifest.n_B}), got {b.shape}"
            )
        terms.append((a, b))
    c = np.asarray(_read_matrix(base / manifest.c_path), dtype=float)
    d = np.asarray(_read_matrix(base / manifest.d_path), dtype=float)
    for name, factor, rows in (("C", c, manifest.n_A), ("D", d, manifest.n_B)):
        if factor.shape != (rows, manifest.q):
            raise ManifestError(
                f"{path}: {name} has shape {factor.shape}, expected "
                f"({rows}, {manifest.q})"
            )
        svals = np.linalg.svd(factor, compute_uv=False)
        if svals.size and svals[-1] <= 1e-12 * svals[0]:
            warnings.warn(
                f"right-hand-side factor {name} is numerically rank deficient",
                RuntimeWarning,
            )
    return MultitermEquation(terms=terms, C=c, D=d)
