"""Experiment manifests and the analysis pipeline they drive.

A manifest pins the system, the transition-function recipe, the epsilon
ladder, the breaking-parameter policy and all windows, and hashes its
canonical JSON form so outputs can assert exactly which configuration
produced them.  No randomness enters anywhere; identical manifests give
identical outputs within one build configuration.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .combinations import ContinuousCombination
from .cycles import (
    CycleRecord,
    SectionSpec,
    find_cycles,
    refine_alpha_for_pair,
    tracking_fiber_ceiling,
    tune_alpha,
)
from .errors import InputError, PreconditionError
from .psvf import PiecewiseSystem, classify_fold_fold, classify_tangencies, region_partition
from .sdi import sdi_profile, small_cycle_ceiling
from .slowfast import RegularizedSystem, chart_hopf_check, critical_data
from .transition import PhiKSpec, TransitionFunction, build_phi_k, check_monotone, psi_function

SCHEMA_VERSION = 1
EPS_FLOOR = 0.02   # below this the inner stripe dynamics is out of scope


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def load_phi(spec: dict | None) -> TransitionFunction:
    """Transition function from its JSON description."""
    if spec is None or spec.get("name") == "psi":
        return psi_function()
    if "zeros" in spec or spec.get("name", "").startswith("phi_k"):
        return build_phi_k(PhiKSpec.from_dict(spec))
    raise InputError(f"unrecognized transition-function spec: {spec}")


@dataclass
class ExperimentManifest:
    system: dict
    phi: dict | None = None
    eps_list: tuple[float, ...] = (0.05,)
    alpha_policy: dict = field(default_factory=lambda: {"mode": "tune"})
    section: dict = field(default_factory=dict)
    windows: dict = field(default_factory=dict)
    kind: str = "terminal"          # terminal | small | dodging
    tolerances: dict = field(default_factory=dict)
    name: str = ""

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "system": self.system,
            "phi": self.phi,
            "eps_list": list(self.eps_list),
            "alpha_policy": self.alpha_policy,
            "section": self.section,
            "windows": self.windows,
            "kind": self.kind,
            "tolerances": self.tolerances,
        }

    @property
    def hash(self) -> str:
        return content_hash(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise InputError(f"unsupported manifest schema {d.get('schema_version')}")
        return cls(system=d["system"], phi=d.get("phi"),
                   eps_list=tuple(d.get("eps_list", (0.05,))),
                   alpha_policy=d.get("alpha_policy", {"mode": "tune"}),
                   section=d.get("section", {}),
                   windows=d.get("windows", {}),
                   kind=d.get("kind", "terminal"),
                   tolerances=d.get("tolerances", {}),
                   name=d.get("name", ""))

    @classmethod
    def from_file(cls, path) -> "ExperimentManifest":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"malformed manifest JSON: {exc}") from exc
        return cls.from_dict(data)


def shipped_manifest(name: str) -> ExperimentManifest:
    ref = resources.files("canardlab").joinpath("manifests", f"{name}.json")
    try:
        data = json.loads(ref.read_text())
    except FileNotFoundError:
        raise InputError(f"no shipped manifest named {name!r}") from None
    return ExperimentManifest.from_dict(data)


# --- analysis steps -----------------------------------------------------------

def analyze_system(system_spec: dict, window: tuple[float, float] = (0.0, 2.0),
                   alpha: float = 0.0) -> dict:
    """Tangency, region and fold-fold report for a piecewise system."""
    comb = ContinuousCombination.from_dict(system_spec)
    sys0 = PiecewiseSystem.from_combination(comb, alpha)
    reports = classify_tangencies(sys0, window)
    part = region_partition(sys0, window)
    out = {
        "system": comb.name,
        "alpha": alpha,
        "tangencies": [
            {"side": r.side, "y": r.y, "kind": r.kind, "second_lie": r.second_lie}
            for r in reports
        ],
        "sliding": part.sliding,
        "sewing": part.sewing,
    }
    plus = [r.y for r in reports if r.side == "plus"]
    minus = [r.y for r in reports if r.side == "minus"]
    # a fold-fold singularity needs coinciding tangency heights
    if len(plus) == 1 and len(minus) == 1 and abs(plus[0] - minus[0]) < 1e-8:
        ff = classify_fold_fold(sys0, 0.5 * (plus[0] + minus[0]))
        out["fold_fold"] = {
            "visibility": ff.visibility,
            "subtype": ff.subtype,
            "quadratic_coefficient": ff.quadratic_coefficient,
        }
    return out


def build_phi_report(spec: PhiKSpec, samples: int = 400) -> dict:
    phi = build_phi_k(spec)
    rep = check_monotone(phi, (-1.0, 1.0), 2000)
    xs = np.linspace(-1.0, 1.0, samples)
    return {
        "spec": spec.to_dict(),
        "monotone": rep.monotone,
        "min_derivative": rep.min_derivative,
        "argmin": rep.argmin,
        "endpoint_values": [phi(-1.0), phi(1.0)],
        "origin": [phi(0.0), phi.deriv(0.0)],
        "samples": [[float(x), phi(x), phi.deriv(x)] for x in xs],
    }


def check_assumptions(system_spec: dict, phi_spec: dict | None) -> dict:
    comb = ContinuousCombination.from_dict(system_spec)
    phi = load_phi(phi_spec)
    crit = critical_data(comb, phi)
    hopf = chart_hopf_check(comb, phi)
    return {
        "A0": {"phi0": phi(0.0), "dphi0": phi.deriv(0.0), "ok": True},
        "A1": crit.checks["A1"],
        "M1": crit.M1,
        "M2": crit.M2,
        "fiber_ceiling": crit.fiber_ceiling,
        "slow_flow_at_origin": crit.slow_flow(0.0),
        "hopf_at_origin": hopf.is_hopf,
    }


def default_terminal_window(crit, phi_spec: dict | None, eps: float
                            ) -> tuple[float, float]:
    """Terminal-section window: fibers inside both the planted-zero zone
    (below the blend annulus image) and the double-precision tracking
    ceiling, mapped through the center-family half map y = 2 - h."""
    ceiling = tracking_fiber_ceiling(eps)
    if phi_spec and "nu" in (phi_spec or {}):
        ceiling = min(ceiling, crit.F(float(phi_spec["nu"])))
    return (2.0 - 0.95 * ceiling, 2.0 - 2e-4)


def run_pipeline(manifest: ExperimentManifest, progress=None) -> dict:
    """assumptions -> SDI profile -> zeros -> tune -> cycles -> convergence."""
    for eps in manifest.eps_list:
        if eps < EPS_FLOOR:
            raise PreconditionError(
                f"eps = {eps} below the supported floor {EPS_FLOOR}; the "
                "inner stripe regime is out of scope")
    comb = ContinuousCombination.from_dict(manifest.system)
    phi = load_phi(manifest.phi)
    crit = critical_data(comb, phi)
    sys0 = PiecewiseSystem.from_combination(comb, 0.0)
    result: dict = {
        "manifest_hash": manifest.hash,
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "assumptions": check_assumptions(manifest.system, manifest.phi),
    }

    kind = manifest.kind
    prof_window = manifest.windows.get("sdi")
    prof = sdi_profile(crit, sys0, kind,
                       tuple(prof_window) if prof_window else None)
    result["sdi_zeros"] = [
        {"y": z.y, "multiplicity": z.multiplicity, "derivative": z.derivative}
        for z in prof.zeros
    ]
    result["sdi_degenerate"] = prof.zeros.degenerate

    rows = []
    for eps in manifest.eps_list:
        sec_cfg = manifest.section
        if "window" in sec_cfg:
            window = tuple(sec_cfg["window"])
        elif kind == "terminal":
            window = default_terminal_window(crit, manifest.phi, eps)
        elif kind == "small":
            hi = min(small_cycle_ceiling(crit, sys0),
                     tracking_fiber_ceiling(eps))
            window = (hi * 0.02, hi)
        else:
            raise InputError("dodging runs need an explicit section window")
        section = SectionSpec(window, sec_cfg.get("direction", 1))

        policy = manifest.alpha_policy
        if policy.get("mode") == "fixed":
            at = float(policy.get("alpha_tilde", 0.0))
            reg = RegularizedSystem(comb, phi, eps, at)
            recs = find_cycles(reg, section,
                               scan_n=int(sec_cfg.get("scan_n", 40)))
        else:
            tuned = tune_alpha(comb, phi, eps, crit=crit)
            at, recs = refine_alpha_for_pair(
                comb, phi, eps, section, tuned.alpha_tilde,
                float(policy.get("pair_step", 1e-7)),
                scan_n=int(sec_cfg.get("scan_n", 40)))
        preds = [z.y for z in prof.zeros]
        dists = [min((abs(r.y - p) for p in preds), default=float("nan"))
                 for r in recs]
        rows.append({
            "eps": eps,
            "alpha_tilde": at,
            "section_window": list(window),
            "cycles": [
                {"y": r.y, "period": r.period, "multiplier": r.multiplier,
                 "classification": r.classification, "residual": r.residual}
                for r in recs
            ],
            "distances": dists,
        })
        if progress:
            progress(f"eps={eps}: {len(recs)} cycles")
    result["runs"] = rows
    if len(rows) >= 2 and all(r["distances"] for r in rows):
        seq = [min(r["distances"]) for r in rows]
        result["convergence_monotone"] = all(
            b <= a + 1e-12 for a, b in zip(seq[:-1], seq[1:]))
    return result
