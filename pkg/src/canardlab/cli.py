"""Command-line front end: a thin client of the analysis service.

Every subcommand serializes its inputs into a service request and posts
it to the API; by default the app runs in-process through an ASGI
transport, and --server redirects the same requests to a remote
instance.  Exit codes: 0 success, 1 input error, 2 violated mathematical
precondition, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from . import __version__

EXIT_BY_CLASS = {"input": 1, "precondition": 2, "numerical": 3}


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # default: run the service in-process over an ASGI test transport
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code >= 400:
        try:
            body = resp.json()
        except Exception:
            print(f"error: HTTP {resp.status_code}: {resp.text}", file=sys.stderr)
            raise SystemExit(3)
        cls = body.get("error_class", "numerical")
        print(f"error[{cls}]: {body.get('message', resp.text)}", file=sys.stderr)
        raise SystemExit(EXIT_BY_CLASS.get(cls, 3))
    return resp.json()


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        print(f"error[input]: no such file: {path}", file=sys.stderr)
        raise SystemExit(1)
    except json.JSONDecodeError as exc:
        print(f"error[input]: malformed JSON in {path}: {exc}", file=sys.stderr)
        raise SystemExit(1)


def _system_payload(args) -> dict:
    if args.system_json:
        spec = _load_json(args.system_json)
        if "A" in spec or "B" in spec:
            return {"name": spec.get("name", "custom"), "mu": spec.get("mu", 0.0),
                    "A": spec.get("A"), "B": spec.get("B")}
        return {"name": spec["name"], "options": spec.get("options", {})}
    return {"name": args.system, "options": json.loads(args.options)}


def _phi_payload(args) -> dict:
    if getattr(args, "phi_json", None):
        spec = _load_json(args.phi_json)
        if "zeros" in spec:
            return {"name": "phi_k", "zeros": spec["zeros"],
                    "delta": spec.get("delta", 0.01), "nu": spec.get("nu", 0.1)}
        return {"name": spec.get("name", "psi")}
    if getattr(args, "phi_zeros", None):
        return {"name": "phi_k", "zeros": [float(z) for z in args.phi_zeros],
                "delta": args.delta, "nu": args.nu}
    return {"name": "psi"}


def _emit(data: dict, out: str | None):
    text = json.dumps(data, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
        print(f"wrote {out}")
    else:
        print(text)


def _write_csv(text: str, path: str):
    Path(path).write_text(text)
    print(f"wrote {path}")


def cmd_analyze(client, args):
    data = _post(client, "/analyze", {
        "system": _system_payload(args),
        "alpha": args.alpha,
        "window": [args.window[0], args.window[1]],
    })
    _emit(data, args.output)
    return 0


def cmd_build_phi(client, args):
    payload = {"k": args.k, "delta": args.delta, "nu": args.nu,
               "samples": args.samples}
    if args.zeros:
        payload["zeros"] = [float(z) for z in args.zeros]
    data = _post(client, "/build-phi", payload)
    if not data["monotone"]:
        print(f"error[precondition]: non-monotone blend "
              f"(min phi' = {data['min_derivative']:.3e})", file=sys.stderr)
        return 2
    samples = data.pop("samples")
    _emit(data, args.output)
    if args.csv:
        lines = ["# canardlab phi v1: x,phi,dphi"]
        lines += [f"{x:.12g},{p:.12g},{d:.12g}" for x, p, d in samples]
        _write_csv("\n".join(lines) + "\n", args.csv)
    return 0


def cmd_check_assumptions(client, args):
    data = _post(client, "/check-assumptions", {
        "system": _system_payload(args),
        "phi": _phi_payload(args),
    })
    for key in ("A0", "A1"):
        status = "pass" if data[key].get("ok", True) else "FAIL"
        print(f"{key}: {status}")
    print(f"A2/A3 validated window: M1={data['M1']:.6g} M2={data['M2']:.6g}")
    print(f"fiber ceiling: {data['fiber_ceiling']:.6g}")
    print(f"slow flow at origin: {data['slow_flow_at_origin']:.6g}")
    print(f"turning point at origin: {'pass' if data['hopf_at_origin'] else 'FAIL'}")
    if args.output:
        _emit(data, args.output)
    return 0


def cmd_sdi(client, args):
    data = _post(client, "/sdi", {
        "system": _system_payload(args),
        "phi": _phi_payload(args),
        "kind": args.kind,
        "window": [args.window[0], args.window[1]] if args.window else None,
        "n": args.n,
    })
    cols = list(data["columns"])
    lines = ["# canardlab sdi v1: y," + ",".join(cols)]
    for i, y in enumerate(data["ys"]):
        lines.append(f"{y:.12g}," + ",".join(
            f"{data['columns'][c][i]:.12g}" for c in cols))
    _write_csv("\n".join(lines) + "\n", args.csv or f"sdi_{args.kind}.csv")
    return 0


def cmd_zeros(client, args):
    data = _post(client, "/zeros", {
        "system": _system_payload(args),
        "phi": _phi_payload(args),
        "kind": args.kind,
        "window": [args.window[0], args.window[1]] if args.window else None,
        "n": args.n,
    })
    _emit(data, args.output)
    return 0


def cmd_cycles(client, args):
    payload = {
        "system": _system_payload(args),
        "phi": _phi_payload(args),
        "eps": args.eps,
        "scan_n": args.scan_n,
        "mode": args.mode,
        "orbit_samples": args.orbit_samples,
        "tune_pair": not args.no_pair,
    }
    if not args.tune_alpha:
        payload["alpha_tilde"] = args.alpha_tilde
    if args.section:
        payload["section_window"] = [args.section[0], args.section[1]]
    data = _post(client, "/cycles", payload)
    orbit = data.pop("orbit_csv", None)
    _emit(data, args.output)
    if orbit and args.orbit_csv:
        _write_csv(orbit, args.orbit_csv)
    return 0


def cmd_sweep(client, args):
    data = _post(client, "/sweep", {
        "system": _system_payload(args),
        "phi": _phi_payload(args),
        "eps_list": [float(e) for e in args.eps_list],
        "alpha_grid": [float(a) for a in args.alpha_grid],
        "section_window": [args.section[0], args.section[1]],
        "scan_n": args.scan_n,
    })
    _write_csv(data["csv"], args.csv or "sweep.csv")
    return 0


def cmd_pipeline(client, args):
    manifest = _load_json(args.manifest)
    data = _post(client, "/pipeline", {"manifest": manifest})
    _emit(data["result"], args.output)
    return 0


def cmd_serve(client, args):
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_system_args(p):
    p.add_argument("--system", default="center",
                   help="builtin system name (center|ii2|dodging)")
    p.add_argument("--options", default="{}",
                   help="JSON options for the builtin system")
    p.add_argument("--system-json", help="path to a system JSON document")


def _add_phi_args(p):
    p.add_argument("--phi-json", help="path to a transition-function spec JSON")
    p.add_argument("--phi-zeros", nargs="*",
                   help="planted zeros of a phi_k transition function")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--nu", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="canardlab",
        description="canard-cycle laboratory for regularized piecewise-"
                    "smooth systems")
    ap.add_argument("--server", help="base URL of a running service; "
                                     "default runs the app in-process")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="tangency / region / fold-fold report")
    _add_system_args(p)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--window", nargs=2, type=float, default=(0.0, 2.0))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("build-phi", help="construct a monotone phi_k")
    p.add_argument("-k", type=int, default=1)
    p.add_argument("--zeros", nargs="*")
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--csv", help="write sampled (x, phi, phi') CSV here")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_build_phi)

    p = sub.add_parser("check-assumptions",
                       help="validate the structural assumptions")
    _add_system_args(p)
    _add_phi_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_check_assumptions)

    p = sub.add_parser("sdi", help="tabulate slow divergence integrals")
    _add_system_args(p)
    _add_phi_args(p)
    p.add_argument("--kind", choices=("terminal", "small", "dodging"),
                   default="small")
    p.add_argument("--window", nargs=2, type=float)
    p.add_argument("-n", type=int, default=200)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sdi)

    p = sub.add_parser("zeros", help="zero set of the selected predictor")
    _add_system_args(p)
    _add_phi_args(p)
    p.add_argument("--kind", choices=("terminal", "small", "dodging"),
                   default="small")
    p.add_argument("--window", nargs=2, type=float)
    p.add_argument("-n", type=int, default=200)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_zeros)

    p = sub.add_parser("cycles", help="locate limit cycles at eps > 0")
    _add_system_args(p)
    _add_phi_args(p)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--alpha-tilde", type=float, default=0.0)
    p.add_argument("--tune-alpha", action="store_true",
                   help="tune the breaking parameter by canard shooting")
    p.add_argument("--no-pair", action="store_true",
                   help="skip the cycle-pair refinement after tuning")
    p.add_argument("--section", nargs=2, type=float)
    p.add_argument("--scan-n", type=int, default=40)
    p.add_argument("--mode", default="eps-power-2",
                   choices=("eps-power-1", "eps-power-2"))
    p.add_argument("--orbit-samples", type=int, default=0)
    p.add_argument("--orbit-csv")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_cycles)

    p = sub.add_parser("sweep", help="eps x alpha grid of cycle counts")
    _add_system_args(p)
    _add_phi_args(p)
    p.add_argument("--eps-list", nargs="+", required=True)
    p.add_argument("--alpha-grid", nargs="+", required=True)
    p.add_argument("--section", nargs=2, type=float, required=True)
    p.add_argument("--scan-n", type=int, default=30)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="run a manifest end to end")
    p.add_argument("manifest")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8717)
    p.set_defaults(func=cmd_serve)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return cmd_serve(None, args)
    with make_client(args.server) as client:
        try:
            return args.func(client, args)
        except SystemExit as exc:
            return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
