"""FastAPI front end wrapping the analysis package.

Errors map onto the CLI exit-code contract through the error_class field:
input -> 1, precondition -> 2, numerical -> 3.
"""

from __future__ import annotations

import io

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..combinations import ContinuousCombination
from ..cycles import SectionSpec, find_cycles, refine_alpha_for_pair, tune_alpha
from ..errors import CanardLabError, InputError, NumericalError, PreconditionError
from ..pipeline import (
    ExperimentManifest,
    analyze_system,
    build_phi_report,
    check_assumptions,
    default_terminal_window,
    load_phi,
    run_pipeline,
)
from ..psvf import PiecewiseSystem
from ..sdi import sdi_profile
from ..slowfast import RegularizedSystem, critical_data
from ..transition import PhiKSpec, default_spec
from . import schemas as S

app = FastAPI(title="canardlab", version=__version__)


def _error_class(exc: CanardLabError) -> str:
    if isinstance(exc, InputError):
        return "input"
    if isinstance(exc, PreconditionError):
        return "precondition"
    return "numerical"


@app.exception_handler(CanardLabError)
async def _canardlab_error(request: Request, exc: CanardLabError):
    return JSONResponse(
        status_code=422,
        content={"error_class": _error_class(exc), "message": str(exc)},
    )


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/analyze", response_model=S.AnalyzeResponse)
def analyze(req: S.AnalyzeRequest):
    return analyze_system(req.system.to_combination_dict(),
                          tuple(req.window), req.alpha)


@app.post("/build-phi", response_model=S.BuildPhiResponse)
def build_phi(req: S.BuildPhiRequest):
    if req.zeros is not None:
        spec = PhiKSpec(tuple(req.zeros), req.delta, req.nu)
    else:
        spec = default_spec(req.k, req.delta, req.nu)
    return build_phi_report(spec, req.samples)


@app.post("/check-assumptions", response_model=S.AssumptionsResponse)
def assumptions(req: S.AssumptionsRequest):
    return check_assumptions(req.system.to_combination_dict(),
                             req.phi.to_dict())


@app.post("/sdi", response_model=S.SdiResponse)
def sdi(req: S.SdiRequest):
    comb = ContinuousCombination.from_dict(req.system.to_combination_dict())
    phi = load_phi(req.phi.to_dict())
    crit = critical_data(comb, phi)
    sys0 = PiecewiseSystem.from_combination(comb, 0.0)
    prof = sdi_profile(crit, sys0, req.kind,
                       tuple(req.window) if req.window else None, req.n)
    return {
        "kind": prof.kind,
        "ys": prof.ys.tolist(),
        "columns": {k: v.tolist() for k, v in prof.columns.items()},
        "zeros": [{"y": z.y, "residual": z.residual, "derivative": z.derivative,
                   "multiplicity": z.multiplicity} for z in prof.zeros],
        "degenerate": prof.zeros.degenerate,
    }


@app.post("/zeros", response_model=S.ZerosResponse)
def zeros(req: S.ZerosRequest):
    full = sdi(req)
    return {"kind": full["kind"], "zeros": full["zeros"],
            "degenerate": full["degenerate"]}


@app.post("/cycles", response_model=S.CyclesResponse)
def cycles(req: S.CyclesRequest):
    comb = ContinuousCombination.from_dict(req.system.to_combination_dict())
    phi = load_phi(req.phi.to_dict())
    crit = critical_data(comb, phi)
    if req.section_window is not None:
        window = tuple(req.section_window)
    else:
        window = default_terminal_window(crit, req.phi.to_dict(), req.eps)
    section = SectionSpec(window)
    if req.alpha_tilde is not None:
        at = req.alpha_tilde
        reg = RegularizedSystem(comb, phi, req.eps, at, req.mode)
        recs = find_cycles(reg, section, scan_n=req.scan_n)
    else:
        tuned = tune_alpha(comb, phi, req.eps, crit=crit)
        at = tuned.alpha_tilde
        if req.tune_pair:
            at, recs = refine_alpha_for_pair(comb, phi, req.eps, section,
                                             at, 1e-7, mode=req.mode,
                                             scan_n=req.scan_n)
        else:
            reg = RegularizedSystem(comb, phi, req.eps, at, req.mode)
            recs = find_cycles(reg, section, scan_n=req.scan_n)
    orbit_csv = None
    if req.orbit_samples and recs:
        from ..odetools import integrate as _integrate

        reg = RegularizedSystem(comb, phi, req.eps, at, req.mode)
        fld = reg.field()
        sol = _integrate(fld.rhs, (0.0, recs[0].y), (0.0, recs[0].period),
                         rtol=1e-10, atol=1e-12)
        ts = np.linspace(0.0, recs[0].period, req.orbit_samples)
        buf = io.StringIO()
        buf.write("# canardlab orbit v1: t,x,y\n")
        for t in ts:
            x, y = sol.sol(t)
            buf.write(f"{t:.12g},{x:.12g},{y:.12g}\n")
        orbit_csv = buf.getvalue()
    return {
        "eps": req.eps,
        "alpha_tilde": at,
        "section_window": window,
        "cycles": [{"y": r.y, "period": r.period, "multiplier": r.multiplier,
                    "classification": r.classification, "residual": r.residual}
                   for r in recs],
        "orbit_csv": orbit_csv,
    }


@app.post("/sweep", response_model=S.SweepResponse)
def sweep(req: S.SweepRequest):
    comb = ContinuousCombination.from_dict(req.system.to_combination_dict())
    phi = load_phi(req.phi.to_dict())
    section = SectionSpec(tuple(req.section_window))
    counts = []
    for eps in req.eps_list:
        row = []
        for at in req.alpha_grid:
            reg = RegularizedSystem(comb, phi, eps, at)
            try:
                row.append(len(find_cycles(reg, section, scan_n=req.scan_n)))
            except CanardLabError:
                row.append(-1)
        counts.append(row)
    buf = io.StringIO()
    buf.write("# canardlab sweep v1: eps then one count column per alpha\n")
    buf.write("eps," + ",".join(f"alpha={a:g}" for a in req.alpha_grid) + "\n")
    for eps, row in zip(req.eps_list, counts):
        buf.write(f"{eps:g}," + ",".join(str(c) for c in row) + "\n")
    return {"eps_list": req.eps_list, "alpha_grid": req.alpha_grid,
            "counts": counts, "csv": buf.getvalue()}


@app.post("/pipeline", response_model=S.PipelineResponse)
def pipeline(req: S.PipelineRequest):
    manifest = ExperimentManifest.from_dict(req.manifest)
    return {"result": run_pipeline(manifest)}
