"""Experiment configuration: a strict TOML file.

Grammar: UTF-8 TOML (plain key/value pairs grouped in nested tables).
Unknown keys are errors, seeds are mandatory, and nothing statistical
has a silent default.  Sections:

  [experiment]      name, output_dir (optional; env override wins)
  [surface]         model = genus2_octagon | cusped_quadrilateral | free_plane
  [representation]  preset = <name>   OR   inline matrices:
                    generators = [ [[re, im], ...row-major...], ... ]
                    form_kind = "hermitian"|"symplectic" (optional)
                    form_matrix = [[re, im], ...] (row-major, optional)
                    strongly_irreducible = bool (optional)
                    hypergeometric_a / hypergeometric_b = [floats] for the
                    Sp(4) slots (parameters are inputs, never shipped)
  [estimator]       dt, horizon, n_paths, seed (required); n_batches,
                    renorm_interval, burn_in_fraction,
                    max_substep_refinements, cusp_y_cap, exterior_k,
                    probe_dt, n_probes (optional)
  [divisor]         optional; basis = [ [ [re, im], ... ], ... ] (one list
                    per F basis vector), degree = [num, den]
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .brownian import PathConfig
from .cocycle import Representation
from .grassmann import StructureForm
from .presets import DivisorSpec, Preset, build_hypergeometric, get_preset


class ConfigError(ValueError):
    """Schema violation with field diagnostics."""


_SECTIONS = {"experiment", "surface", "representation", "estimator", "divisor"}
_KEYS = {
    "experiment": {"name", "output_dir"},
    "surface": {"model"},
    "representation": {
        "preset",
        "generators",
        "form_kind",
        "form_matrix",
        "strongly_irreducible",
        "unitary",
        "hypergeometric_a",
        "hypergeometric_b",
    },
    "estimator": {
        "dt",
        "horizon",
        "n_paths",
        "seed",
        "n_batches",
        "renorm_interval",
        "burn_in_fraction",
        "max_substep_refinements",
        "cusp_y_cap",
        "exterior_k",
        "probe_dt",
        "n_probes",
    },
    "divisor": {"basis", "degree"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    surface_name: str
    representation: Representation
    path_config: PathConfig
    n_paths: int
    n_batches: int = 20
    renorm_interval: int = 16
    burn_in_fraction: float = 0.1
    exterior_k: int = 1
    probe_dt: float = 0.25
    n_probes: int = 8
    divisor: DivisorSpec | None = None
    preset_name: str | None = None
    output_dir: str | None = None
    raw: dict = field(default_factory=dict, compare=False, repr=False)


def _complex_entry(pair, where: str) -> complex:
    if (
        not isinstance(pair, (list, tuple))
        or len(pair) != 2
        or not all(isinstance(v, (int, float)) for v in pair)
    ):
        raise ConfigError(f"{where}: complex entries are [re, im] pairs, got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def _matrix(rows, where: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise ConfigError(f"{where}: expected a row-major list of [re, im] pairs")
    flat = [_complex_entry(p, where) for p in rows]
    n = math.isqrt(len(flat))
    if n * n != len(flat):
        raise ConfigError(f"{where}: {len(flat)} entries do not form a square matrix")
    return np.array(flat, dtype=complex).reshape(n, n)


def _check_keys(table: dict, section: str) -> None:
    for key in table:
        if key not in _KEYS[section]:
            raise ConfigError(f"unknown key [{section}].{key}")


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a config file; every violation names its field."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    for section in data:
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    for required in ("experiment", "surface", "representation", "estimator"):
        if required not in data:
            raise ConfigError(f"missing section [{required}]")
    for section in data:
        _check_keys(data[section], section)

    exp = data["experiment"]
    if "name" not in exp:
        raise ConfigError("missing [experiment].name")

    surface_name = data["surface"].get("model")
    if surface_name not in ("genus2_octagon", "cusped_quadrilateral", "free_plane"):
        raise ConfigError(f"[surface].model must name a bundled model, got {surface_name!r}")

    est = data["estimator"]
    for required in ("dt", "horizon", "n_paths", "seed"):
        if required not in est:
            raise ConfigError(f"missing [estimator].{required} (no statistical defaults)")
    try:
        path_config = PathConfig(
            dt=float(est["dt"]),
            horizon=float(est["horizon"]),
            max_substep_refinements=int(est.get("max_substep_refinements", 20)),
            rng_seed=int(est["seed"]),
            cusp_y_cap=float(est.get("cusp_y_cap", 50.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"[estimator]: {exc}") from exc

    rep, preset, preset_divisor = _parse_representation(data["representation"], surface_name)

    divisor = preset_divisor
    if "divisor" in data:
        div = data["divisor"]
        if "basis" not in div or "degree" not in div:
            raise ConfigError("[divisor] needs both basis and degree")
        deg = div["degree"]
        if not (isinstance(deg, list) and len(deg) == 2 and all(isinstance(v, int) for v in deg)):
            raise ConfigError("[divisor].degree is a rational [numerator, denominator]")
        vectors = div["basis"]
        if not isinstance(vectors, list) or not vectors:
            raise ConfigError("[divisor].basis is a list of basis vectors")
        cols = []
        for i, vec in enumerate(vectors):
            cols.append([_complex_entry(p, f"[divisor].basis[{i}]") for p in vec])
        basis = np.array(cols, dtype=complex).T
        if basis.shape[0] != rep.n:
            raise ConfigError(
                f"[divisor].basis vectors have length {basis.shape[0]}, fiber rank is {rep.n}"
            )
        divisor = DivisorSpec(basis=basis, degree=Fraction(deg[0], deg[1]))

    return ExperimentConfig(
        name=str(exp["name"]),
        surface_name=surface_name,
        representation=rep,
        path_config=path_config,
        n_paths=int(est["n_paths"]),
        n_batches=int(est.get("n_batches", 20)),
        renorm_interval=int(est.get("renorm_interval", 16)),
        burn_in_fraction=float(est.get("burn_in_fraction", 0.1)),
        exterior_k=int(est.get("exterior_k", 1)),
        probe_dt=float(est.get("probe_dt", 0.25)),
        n_probes=int(est.get("n_probes", 8)),
        divisor=divisor,
        preset_name=data["representation"].get("preset"),
        output_dir=exp.get("output_dir"),
        raw=data,
    )


def _surface_generator_count(surface_name: str) -> int:
    return {"genus2_octagon": 4, "cusped_quadrilateral": 2, "free_plane": 0}[surface_name]


def _parse_representation(table: dict, surface_name: str):
    preset: Preset | None = None
    divisor = None
    if "preset" in table:
        name = table["preset"]
        try:
            preset = get_preset(name)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        if preset.parameters_required:
            a = table.get("hypergeometric_a")
            b = table.get("hypergeometric_b")
            if a is None or b is None:
                raise ConfigError(
                    f"preset {name} needs hypergeometric_a and hypergeometric_b "
                    "(local exponents are config inputs)"
                )
            rep = build_hypergeometric(np.asarray(a, float), np.asarray(b, float), name=name)
        else:
            rep = preset.representation
            divisor = preset.divisor
        if preset.surface != surface_name:
            raise ConfigError(
                f"preset {name} is built over {preset.surface}, config says {surface_name}"
            )
    else:
        if "generators" not in table:
            raise ConfigError("[representation] needs a preset or inline generators")
        mats = [_matrix(m, f"[representation].generators[{i}]") for i, m in enumerate(table["generators"])]
        expected = _surface_generator_count(surface_name)
        if expected and len(mats) != expected:
            raise ConfigError(
                f"surface {surface_name} has {expected} generators, config provides {len(mats)}"
            )
        form = None
        if "form_kind" in table or "form_matrix" in table:
            if "form_kind" not in table or "form_matrix" not in table:
                raise ConfigError("form_kind and form_matrix must appear together")
            form = StructureForm(table["form_kind"], _matrix(table["form_matrix"], "[representation].form_matrix"))
        try:
            rep = Representation(
                generators=tuple(mats),
                form=form,
                unitary=bool(table.get("unitary", False)),
                strongly_irreducible=table.get("strongly_irreducible"),
                name="inline",
            )
        except ValueError as exc:
            raise ConfigError(f"[representation]: {exc}") from exc
    if "strongly_irreducible" in table and preset is not None:
        rep = Representation(
            generators=rep.generators,
            form=rep.form,
            unitary=rep.unitary,
            strongly_irreducible=bool(table["strongly_irreducible"]),
            name=rep.name,
        )
    return rep, preset, divisor
