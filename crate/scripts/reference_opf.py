#!/usr/bin/env python3
"""Reference ACOPF objectives for the bundled MATPOWER cases.

Solves the full polar ACOPF with PYPOWER's primal-dual interior point
solver (PIPS). Angle-difference limits are disabled so the problem
matches the one the ADMM solver targets. The printed JSON is stored in
data/reference_objectives.json and used as a fixture by the tests.

Usage: python3 scripts/reference_opf.py data/case9.m [more cases...]
       python3 scripts/reference_opf.py --scale 1.02 data/case30.m
       python3 scripts/reference_opf.py --solution data/case9.m
       python3 scripts/reference_opf.py --track data/case30_sine10.csv data/case30.m

With --solution the full solution (generator set points in p.u., bus
voltage magnitudes, angles in radians) is printed instead of objectives.

With --track the periods of a `period,multiplier` profile are solved in
sequence; from period 2 on each generator's real-power bounds are
intersected with a window of --ramp-frac * Pmax around the previous
period's reference dispatch, as the tracker does.
"""

import argparse
import json
import re
import sys

import numpy as np
import pypower.pipsopf_solver as pipsopf_solver
from pypower.api import ppoption, runopf
from pypower.opf_consfcn import opf_consfcn


def _flat_consfcn(*args, **kwargs):
    # PYPOWER returns a 2-D empty h when no branch is rate-limited, which
    # newer numpy refuses to concatenate.
    h, g, dh, dg = opf_consfcn(*args, **kwargs)
    return np.asarray(h).ravel(), np.asarray(g).ravel(), dh, dg


pipsopf_solver.opf_consfcn = _flat_consfcn


def load_case(path):
    text = open(path).read()
    ppc = {"version": "2"}
    ppc["baseMVA"] = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)", text).group(1))
    for name in ("bus", "gen", "branch", "gencost"):
        body = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S).group(1)
        rows = []
        for line in body.splitlines():
            line = line.split("%")[0].strip().rstrip(";").strip()
            if line:
                rows.append([float(t) for t in line.split()])
        ppc[name] = np.array(rows)
    return ppc


def prepare(ppc, scale):
    ppc["bus"][:, 2:4] *= scale
    ppc["branch"][:, 11] = -360.0
    ppc["branch"][:, 12] = 360.0
    if not np.any(ppc["branch"][:, 5] > 0):
        # PYPOWER's Hessian assembly fails with zero limited branches;
        # an inactive 1e5 MVA limit leaves the problem unchanged.
        ppc["branch"][0, 5] = 1e5
    return ppc


def track(case, profile, ramp_frac, opt):
    rows = [line.split(",") for line in open(profile).read().split()[1:]]
    out, prev = [], None
    for period, mult in rows:
        ppc = prepare(load_case(case), float(mult))
        if prev is not None:
            gen = ppc["gen"]
            r = ramp_frac * gen[:, 8]
            gen[:, 8] = np.minimum(gen[:, 8], prev + r)
            gen[:, 9] = np.maximum(gen[:, 9], prev - r)
        res = runopf(ppc, opt)
        prev = res["gen"][:, 1].copy()
        out.append({"period": int(period), "multiplier": float(mult),
                    "objective": float(res["f"]), "success": bool(res["success"])})
        print(period, res["f"], res["success"], file=sys.stderr)
    print(json.dumps(out, indent=2))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("cases", nargs="+")
    ap.add_argument("--scale", type=float, default=1.0, help="uniform load multiplier")
    ap.add_argument("--solution", action="store_true", help="print the solution of each case")
    ap.add_argument("--track", help="period,multiplier CSV; solve the periods in sequence")
    ap.add_argument("--ramp-frac", type=float, default=0.02)
    args = ap.parse_args()
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PDIPM_GRADTOL=1e-9, PDIPM_COMPTOL=1e-9,
                   PDIPM_COSTTOL=1e-10, PDIPM_FEASTOL=1e-9, PDIPM_MAX_IT=500)
    if args.track:
        track(args.cases[0], args.track, args.ramp_frac, opt)
        return
    out = {}
    for path in args.cases:
        ppc = prepare(load_case(path), args.scale)
        res = runopf(ppc, opt)
        name = path.rsplit("/", 1)[-1].removesuffix(".m")
        out[name] = {"objective": float(res["f"]), "success": bool(res["success"])}
        if args.solution:
            base = res["baseMVA"]
            out[name].update({
                "pg": (res["gen"][:, 1] / base).tolist(),
                "qg": (res["gen"][:, 2] / base).tolist(),
                "bus": res["bus"][:, 0].astype(int).tolist(),
                "vm": res["bus"][:, 7].tolist(),
                "va": np.deg2rad(res["bus"][:, 8]).tolist(),
            })
        print(name, res["f"], res["success"], file=sys.stderr)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
