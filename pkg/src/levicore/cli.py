"""levicore command line: classify | core | dims | verify-example | witness."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod, dims as dims_mod
from .core import (
    analyze_boundary,
    compute_core,
    derive_next,
    partition_boundary,
    stage_zero,
    LOW_CONFIDENCE_FRACTION,
    _rotate_real,
    _tangent_estimates,
)
from .errors import InvariantBreach, NonStabilizationError, PreconditionError
from .hartogs import BoundaryPoint, PotentialField
from .levi import Classification
from .linalg import complexify, orthonormalize, principal_angles
from .propertyp import AdmissibilityError, candidate_from_grid, finite_witness, witness_verify
from . import sets2d

log = logging.getLogger("levicore")

EXAMPLE_DIM_RANGE = (2.75, 3.0)
AGREEMENT_MIN = 0.99
PCA_COS_MIN = 1 - 1e-3
FRAME_COS_MIN = 1 - 1e-10
MAX_FRAME_POINTS = 1000
STRONG, WEAK = Classification.STRONGLY.value, Classification.WEAKLY.value


# ---------------------------------------------------------------------------
# emission


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def _analysis(cfg):
    domain = cfg.domain.build()
    sample = domain.boundary_sample(cfg.n_z, cfg.n_theta, cfg.k_samples, cfg.seed)
    return domain, analyze_boundary(domain, sample, cfg.eps_rel)


def _closed_form_error(an) -> float | None:
    """Max relative error of the Levi eigenvalue off K against exp(-2 phi) g / |d rho|^3."""
    dom = an.domain
    if not isinstance(dom.potential, PotentialField):
        return None
    off = ~an.weak & (an.dist_K > 0)
    if not off.any():
        return None
    s = an.sample
    g = dom.potential.g(s.z[off])
    gn = np.linalg.norm(an.grad[off], axis=1)
    ref = np.exp(-2 * s.phi[off]) * g / gn**3
    lam = an.eigenvalues[off, 0]
    return float(np.max(np.abs(lam - ref) / np.abs(ref)))


def _agreement(an) -> dict:
    """Weak classification vs membership in K, outside the width-h band."""
    if an.domain.K is None:
        return {"n_outside_band": int(len(an.sample)), "agreement": None}
    on_k = an.dist_K == 0
    outside = ~an.band
    agree = np.mean(an.weak[outside] == on_k[outside]) if outside.any() else float("nan")
    return {"n_outside_band": int(outside.sum()), "agreement": float(agree), "n_band": int(an.band.sum())}


def cmd_classify(cfg, out: Path) -> int:
    domain, an = _analysis(cfg)
    s = an.sample
    on_k = an.dist_K == 0
    rows = (
        (i, s.z[i].real, s.z[i].imag, s.theta[i], s.w[i].real, s.w[i].imag, an.eigenvalues[i, 0],
         an.eigenvalues[i, -1], (WEAK if an.weak[i] else STRONG), on_k[i], an.dist_K[i], an.band[i], s.lattice[i])
        for i in range(len(s))
    )
    write_csv(out / "classification.csv",
              ["index", "z_re[1]", "z_im[1]", "theta[rad]", "w_re[1]", "w_im[1]", "levi_min[1]", "levi_max[1]",
               "class", "on_K", "dist_K[1]", "band", "lattice"], rows)
    n = len(s)
    summary = {
        "command": "classify",
        "domain": domain.name,
        "n_samples": n,
        "n_strong": int((~an.weak).sum()),
        "n_weak": int(an.weak.sum()),
        "fraction_strong": float(np.mean(~an.weak)),
        "eps_rel": cfg.eps_rel,
        "membership": _agreement(an),
        "levi_closed_form_max_rel_err": _closed_form_error(an),
    }
    write_json(out / "classify_summary.json", summary)
    return 0


def _stage_rows(chain):
    for k, st in enumerate(chain.stages):
        rec = chain.records[k] if k < len(chain.records) else {}
        for i in st.index:
            r = rec.get(int(i))
            td = "" if r is None or r.tangent_dim is None else r.tangent_dim
            mc = "" if r is None or not len(r.cosines) else float(np.max(r.cosines))
            nd = "" if r is None else r.new_dim
            yield (st.stage, int(i), st.bases[int(i)].dim, td, mc, nd)


def _chain_json(chain, cfg, corollary=None) -> dict:
    return {
        "command": "core",
        "domain": chain.analysis.domain.name if chain.analysis else None,
        "n_samples": len(chain.analysis.sample) if chain.analysis else 0,
        "stabilized": chain.stabilized,
        "stages": [
            {"stage": st.stage, "size": len(st), "dims": st.dim_histogram(), "unresolved": st.unresolved,
             "low_confidence": st.low_confidence}
            for st in chain.stages
        ],
        "core_size": len(chain.core),
        "params": {"eps_rel": cfg.eps_rel, "intersect_tol": cfg.intersect_tol, "tau": cfg.tau,
                   "scale_window": list(cfg.scale_window), "max_iter": cfg.max_iter},
        "corollary": corollary,
    }


def _write_chain(chain, cfg, out: Path, corollary=None):
    write_json(out / "chain.json", _chain_json(chain, cfg, corollary))
    write_csv(out / "stages.csv", ["stage", "index", "dim", "tangent_dim", "max_cosine[1]", "next_dim"],
              _stage_rows(chain))


def cmd_core(cfg, out: Path) -> int:
    _, an = _analysis(cfg)
    try:
        chain = compute_core(an.domain, cfg.core_params(), an)
    except NonStabilizationError as exc:
        if exc.chain is not None:
            _write_chain(exc.chain, cfg, out)
        raise
    corollary = dims_mod.corollary_report(chain)
    _write_chain(chain, cfg, out, corollary)
    labels = partition_boundary(chain, an)
    s = an.sample
    write_csv(out / "partition.csv", ["index", "x[1]", "y[1]", "theta[rad]", "label", "name"],
              ((i, s.z[i].real, s.z[i].imag, s.theta[i], lab, labels.name(i)) for i, lab in enumerate(labels.labels)))
    return 0


def _support_box_count(cfg, K):
    lo, hi = cfg.delta_window
    deltas = dims_mod.dyadic_deltas(lo, hi)
    cloud = dims_mod.set_times_circle(K, deltas, n_sample=2**16, seed=cfg.seed)
    sp, diam = cloud.spacing(), cloud.diameter()
    deltas = [d for d in deltas if 4 * sp <= d <= diam / 4]
    if len(deltas) < dims_mod.MIN_SCALES:
        raise PreconditionError("delta window leaves fewer than 4 valid scales for this set")
    rep = dims_mod.box_count(cloud, deltas, content_dims=(2, 3))
    return rep


def cmd_dims(cfg, out: Path) -> int:
    K = cfg.domain.K_set()
    result = {"command": "dims", "heuristic": True, "target": "K x circle", "report": None, "content_flags": None}
    if K is not None:
        rep = _support_box_count(cfg, K)
        result["report"] = rep.to_dict()
        result["content_flags"] = {str(d): dims_mod.content_flag(rep, d) for d in (2, 3)}
        result["local_slope"] = dims_mod.local_slope(rep)
        write_csv(out / "loglog.csv", ["delta[1]", "count", "log_inv_delta", "log_count"],
                  ((dl, c, x, y) for (dl, c), (x, y) in zip(zip(rep.deltas, rep.counts), rep.loglog_rows())))
    _, an = _analysis(cfg)
    chain = compute_core(an.domain, cfg.core_params(), an)
    result["corollary"] = dims_mod.corollary_report(chain)
    write_json(out / "dims.json", result)
    return 0


def _check_a(an) -> dict:
    agr = _agreement(an)
    s = an.sample
    weak_z, counts = np.unique(s.z[an.weak], return_counts=True)
    invariant = bool(np.all(counts == s.n_theta))
    ok = agr["agreement"] is not None and agr["agreement"] >= AGREEMENT_MIN and invariant
    return {"pass": bool(ok), "agreement_outside_band": agr["agreement"], "n_outside_band": agr["n_outside_band"],
            "n_weak": int(an.weak.sum()), "n_weak_base_points": int(len(weak_z)), "full_circles": invariant}


def _check_b(an, cfg, stage0, estimates) -> dict:
    dom = an.domain
    s = an.sample
    idx = stage0.index[np.asarray(an.dist_K[stage0.index] == 0)]
    idx = idx[:: max(1, len(idx) // MAX_FRAME_POINTS)]
    ranks, frame_cos, pca_dims, pca_cos = [], [], [], []
    unresolved = 0
    for i in idx:
        bp = BoundaryPoint(complex(s.z[i]), float(s.theta[i]), complex(s.w[i]))
        fr = dom.example_tangent_frame(bp)
        sv = np.linalg.svd(fr, compute_uv=False)
        ranks.append(int(np.sum(sv > 1e-10 * sv[0])))
        ct = complexify(an.real_tangent(int(i)))
        fb = orthonormalize(fr, tol=1e-10)
        frame_cos.append(float(principal_angles(fb, ct).min()) if fb.dim == ct.dim else 0.0)
        est = estimates.get(("z", complex(s.z[i]))) or estimates.get(int(i))
        if est is None or not est.resolved:
            unresolved += 1
            continue
        pca_dims.append(est.plateau_dim)
        raw = _rotate_real(est.real_basis, float(s.theta[i])) if ("z", complex(s.z[i])) in estimates else est.real_basis
        cb = complexify(raw)
        pca_cos.append(float(principal_angles(cb, ct).min()) if cb.dim == ct.dim else 0.0)
    ok = (len(idx) > 0 and all(r == 3 for r in ranks) and min(frame_cos) >= FRAME_COS_MIN
          and unresolved <= LOW_CONFIDENCE_FRACTION * len(idx) and all(d == 3 for d in pca_dims)
          and min(pca_cos) >= PCA_COS_MIN)
    return {"pass": bool(ok), "n_points": int(len(idx)), "frame_ranks": sorted(set(ranks)),
            "min_frame_cosine": min(frame_cos) if frame_cos else None,
            "pca_plateau_dims": sorted(set(pca_dims)), "pca_unresolved": unresolved,
            "min_pca_cosine": min(pca_cos) if pca_cos else None}


def _check_c(an, cfg, stage0, estimates) -> dict:
    nxt, _ = derive_next(stage0, an, cfg.core_params(), estimates=estimates)
    same = nxt.same_as(stage0)
    all_one = bool(np.all(nxt.dims() == 1)) if len(nxt) else False
    try:
        chain = compute_core(an.domain, cfg.core_params(), an)
        stab = chain.stabilized
        core_is_support = bool(np.array_equal(chain.core.index, stage0.index))
        n_stages = len(chain.stages)
    except NonStabilizationError:
        stab, core_is_support, n_stages = False, False, None
    ok = same and all_one and stab and core_is_support
    return {"pass": bool(ok), "derived_equals_support": bool(same), "all_dims_one": all_one,
            "stabilized": bool(stab), "core_equals_support": core_is_support, "n_stages": n_stages,
            "support_size": int(len(stage0))}


def _check_d(cfg, K) -> dict:
    rep = _support_box_count(cfg, K)
    flag = dims_mod.content_flag(rep, 3)
    lo, hi = EXAMPLE_DIM_RANGE
    ok = lo <= rep.dimension <= hi and flag == dims_mod.POSITIVE
    return {"pass": bool(ok), "dimension": rep.dimension, "expected_range": [lo, hi], "content_flag_d3": flag,
            "local_slope": dims_mod.local_slope(rep), "heuristic": True}


def cmd_verify_example(cfg, out: Path) -> int:
    if cfg.domain.kind != "hartogs":
        raise PreconditionError("verify-example needs a Hartogs domain over a set K; this domain has no weak locus")
    _, an = _analysis(cfg)
    stage0 = stage_zero(an)
    if not len(stage0):
        raise PreconditionError("no weakly pseudoconvex points: the null distribution has empty support")
    estimates = _tangent_estimates(stage0, an, cfg.core_params())
    checks = {
        "a_support_locus": _check_a(an),
        "b_tangent_frame": _check_b(an, cfg, stage0, estimates),
        "c_derived_equals_null": _check_c(an, cfg, stage0, estimates),
        "d_box_dimension": _check_d(cfg, cfg.domain.K_set()),
    }
    verdict = {"command": "verify-example", "domain": an.domain.name, "checks": checks,
               "all_pass": all(c["pass"] for c in checks.values())}
    write_json(out / "verify.json", verdict)
    return 0


def cmd_witness(cfg, out: Path) -> int:
    w = cfg.witness
    if not w or "M" not in w:
        raise PreconditionError("config needs a 'witness' object with at least M")
    M = float(w["M"])
    h = float(w.get("grid_h", 1e-3))
    K = sets2d.from_dict(w["K"]) if "K" in w else cfg.domain.K_set()
    if K is None:
        raise PreconditionError("witness needs a set K")
    if w.get("lambda_file"):
        path = Path(w["lambda_file"])
        if not path.is_absolute() and cfg.source:
            path = Path(cfg.source).parent / path
        cand = candidate_from_grid(path, M)
    else:
        try:
            cand = finite_witness(K, M)
        except AdmissibilityError as exc:
            write_json(out / "witness.json", {"command": "witness", "verdict": "rejected", "reason": str(exc),
                                              "min_M": exc.min_M, "M": M})
            raise
    res = witness_verify(cand, K, h)
    d = res.to_dict()
    d.update({"command": "witness", "candidate": cand.name, "neighborhood": cand.U.describe()})
    write_json(out / "witness.json", d)
    return 0


COMMANDS = {
    "classify": cmd_classify,
    "core": cmd_core,
    "dims": cmd_dims,
    "verify-example": cmd_verify_example,
    "witness": cmd_witness,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levicore", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = None
    try:
        cfg = config_mod.load(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
        out = Path(args.out or cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except (PreconditionError, NonStabilizationError, InvariantBreach) as exc:
        print(f"levicore {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        if out is not None:
            write_json(out / "error.json", {"command": args.command, "error": type(exc).__name__,
                                            "message": str(exc), "exit_code": exc.exit_code})
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
