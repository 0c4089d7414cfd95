"""Run manifests: TOML scenario files resolved into typed objects.

A manifest has top-level ``name``, ``seed``, ``n`` and ``output_dir`` keys and
the tables ``[kernel]``, ``[potential]``, ``[initial]`` (with an optional
``[initial.velocity]``), ``[sim]`` and ``[diagnostics]``. The annotated files
in ``alignflow/scenarios/`` document every key.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
import hashlib
import json
import os
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .dynamics import SimConfig
from .errors import AlignflowError, ConfigParse
from .kernels import KernelSpec
from .metrics import check_admissible
from .potentials import PotentialSpec

OUTPUT_ROOT_ENV = "ALIGNFLOW_OUTPUT_ROOT"
SCENARIO_PACKAGE = "alignflow.scenarios"

_KERNEL_KEYS = {
    "constant": ("value",),
    "bounded_band": ("psi_min", "psi_max", "radius"),
    "power_law": ("alpha", "coeff_b"),
    "table": ("knots",),
}


@dataclass(frozen=True, eq=False)
class RunManifest:
    name: str
    kernel: KernelSpec
    potential: PotentialSpec
    initial: dict
    sim: SimConfig
    n: int | None
    seed: int
    output_dir: str
    zeta: float | None = None
    xi: float | None = None
    resolved: dict | None = None

    @property
    def digest(self):
        """Short hash of the resolved manifest; written into every output header."""
        text = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def output_path(self, override=None):
        if override is not None:
            return Path(override)
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            return Path(root) / out
        return out


def _require(table, keys, where):
    missing = [k for k in keys if k not in table]
    if missing:
        raise ConfigParse(f"[{where}] is missing {', '.join(missing)}")


def build_kernel(desc: dict):
    family = desc.get("family")
    if family not in _KERNEL_KEYS:
        raise ConfigParse(f"[kernel] family must be one of {sorted(_KERNEL_KEYS)}, got {family!r}")
    _require(desc, _KERNEL_KEYS[family], "kernel")
    if family == "constant":
        kernel = KernelSpec.constant(desc["value"])
    elif family == "bounded_band":
        kernel = KernelSpec.bounded_band(desc["psi_min"], desc["psi_max"], desc["radius"])
    elif family == "power_law":
        kernel = KernelSpec.power_law(desc["alpha"], desc["coeff_b"], floor=desc.get("floor", 0.0),
                                      coeff_a=desc.get("coeff_a"))
    else:
        kernel = KernelSpec.table([tuple(k) for k in desc["knots"]])
    if desc.get("eps") is not None:
        kernel = kernel.regularized(desc["eps"])
    return kernel


def build_potential(desc: dict):
    family = desc.get("family")
    dim = int(desc.get("dim", 1))
    if family == "quadratic":
        return PotentialSpec.quadratic(desc.get("lam", 1.0), dim=dim)
    if family == "soft_convex":
        _require(desc, ("lam", "Lam"), "potential")
        return PotentialSpec.soft_convex(desc["lam"], desc["Lam"], dim=dim)
    if family == "coulomb_quadratic":
        return PotentialSpec.coulomb_quadratic()
    if family == "null":
        return PotentialSpec.null(dim)
    raise ConfigParse(f"[potential] family {family!r} cannot be described in a manifest "
                      "(choose quadratic, soft_convex, coulomb_quadratic or null)")


def _sim_config(desc: dict):
    known = {f.name for f in fields(SimConfig)}
    extra = set(desc) - known
    if extra:
        raise ConfigParse(f"[sim] unknown keys: {', '.join(sorted(extra))}")
    _require(desc, ("t_final",), "sim")
    return SimConfig(**desc)


def parse_manifest(data: dict, source="<memory>"):
    """Resolve a parsed TOML document into a :class:`RunManifest`."""
    try:
        for table in ("kernel", "potential", "initial", "sim"):
            if not isinstance(data.get(table), dict):
                raise ConfigParse(f"{source}: missing [{table}] table")
        kernel = build_kernel(data["kernel"])
        potential = build_potential(data["potential"])
        sim = _sim_config(dict(data["sim"]))
        diag = data.get("diagnostics", {})
        zeta, xi = diag.get("zeta"), diag.get("xi")
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"{source}: {exc}") from exc
    except ConfigParse as exc:
        if source not in str(exc):
            raise ConfigParse(f"{source}: {exc}") from exc
        raise
    except AlignflowError as exc:
        raise ConfigParse(f"{source}: {exc}") from exc
    check_admissible(potential, kernel, zeta, xi)
    name = str(data.get("name", Path(source).stem))
    resolved = {
        "name": name,
        "seed": int(data.get("seed", 0)),
        "n": data.get("n"),
        "output_dir": str(data.get("output_dir", f"runs/{name}")),
        "kernel": dict(data["kernel"]),
        "potential": {"dim": potential.dim, **data["potential"]},
        "initial": data["initial"],
        "sim": asdict(sim),
        "diagnostics": {"zeta": zeta, "xi": xi},
    }
    return RunManifest(name, kernel, potential, dict(data["initial"]), sim, resolved["n"],
                       resolved["seed"], resolved["output_dir"], zeta, xi, resolved)


def load_manifest(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigParse(f"{path}: no such file") from exc
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigParse(f"{path}: {exc}") from exc
    return parse_manifest(data, str(path))


def bundled_scenarios():
    return sorted(p.name[:-5] for p in resources.files(SCENARIO_PACKAGE).iterdir()
                  if p.name.endswith(".toml"))


def load_bundled(name):
    res = resources.files(SCENARIO_PACKAGE) / f"{name}.toml"
    if not res.is_file():
        raise ConfigParse(f"no bundled scenario {name!r}; available: {', '.join(bundled_scenarios())}")
    return parse_manifest(tomllib.loads(res.read_text()), f"{name}.toml")


def resolve(target):
    """A manifest from a file path, or from a bundled scenario name."""
    if Path(target).exists() or str(target).endswith(".toml"):
        return load_manifest(target)
    return load_bundled(target)
