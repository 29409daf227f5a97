"""Verification runs over sampled manifolds, plus the end-to-end pipeline.

Each run returns a :class:`VerificationReport` whose checks decide the CLI
exit code.  Reports hold no timestamps or timings, so reruns with the same
config and seed are byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .deformation import (BaseCaseObstruction, ComplexSampleSet, ProjectionError,
                          BarycentricCloud, project_to_skeleton)
from .measure import (SampleSet, components_of_complement, diameter_bound_check,
                      eilenberg_slices, hausdorff_estimate, separation_radius)
from .metric_core import ManifoldSpec, estimate_doubling, generate
from .nets_nerve import (audit_boundary_agreement, build_cover, build_g, map_f, nerve,
                         partition_of_unity)
from .plots import line_chart
from .simplicial import SimplicialComplex, betti_z2, stable_witness

REPORT_SCHEMA = "isosep-report"
REPORT_VERSION = 1

HOMOTOPY_GAP = ("the homotopy from g(p(f(x))) back to x needs a scale below which close maps are "
                "homotopic; no explicit value is available, so that step is not executed and only "
                "the displacement d(x, g(p(f(x)))) is reported")
HOMOLOGY_SURROGATE = ("Cech cohomology of S is replaced by Z/2 simplicial homology of the nerve of a "
                      "ball cover of S, required to agree at two successive scales")


@dataclass
class VerificationReport:
    command: str
    config: dict
    rows: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    environment: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)      # name -> (header, rows)
    plots: dict = field(default_factory=dict)       # name -> svg text

    def check(self, name: str, invariant: str, passed: bool, **detail) -> bool:
        self.checks.append({"name": name, "invariant": invariant, "passed": bool(passed),
                            "detail": detail})
        return bool(passed)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> dict:
        return _clean({"schema": REPORT_SCHEMA, "version": REPORT_VERSION, "command": self.command,
                       "config": self.config, "environment": self.environment, "rows": self.rows,
                       "derived": self.derived, "checks": self.checks, "notes": self.notes,
                       "passed": self.passed})

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(self.dumps())
        if self.tables:
            os.makedirs(os.path.join(out_dir, "tables"), exist_ok=True)
            for name, (header, rows) in sorted(self.tables.items()):
                with open(os.path.join(out_dir, "tables", f"{name}.csv"), "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(header)
                    w.writerows([[_fmt(v) for v in r] for r in rows])
        if self.plots:
            os.makedirs(os.path.join(out_dir, "plots"), exist_ok=True)
            for name, svg in sorted(self.plots.items()):
                with open(os.path.join(out_dir, "plots", f"{name}.svg"), "w") as fh:
                    fh.write(svg)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception, partial: VerificationReport):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _map(cfg: ExperimentConfig, fn, items):
    items = list(items)
    threads = cfg["run"]["threads"]
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def environment(space) -> dict:
    return {"n": space.n, "h": space.h, "spacing": space.meta.get("spacing"),
            "kind": space.meta.get("kind"), "seed": space.meta.get("seed"),
            "sample_count": space.meta.get("sample_count"), "L_model": space.meta.get("L_model")}


# ---------------------------------------------------------------------------
# test sets


def set_spacing(space, idx) -> float:
    """Sampling spacing around the points ``idx``."""
    factor = space.meta.get("params", {}).get("graph_factor", 2.5)
    return float(space.local_h[np.asarray(idx, dtype=int)].max() / factor)


def colatitude(space) -> np.ndarray:
    """Angle from the first axis, for samples of round spheres."""
    R = space.radius if space.radius else float(np.linalg.norm(space.coords[0]))
    return np.arccos(np.clip(space.coords[:, 0] / R, -1.0, 1.0))


def latitude_set(space, theta: float, band_width: float | None = None,
                 thickening: float = 0.6) -> SampleSet:
    """Samples within half a band width of the circle at colatitude ``theta``."""
    R = space.radius or 1.0
    width = band_width or space.meta["spacing"]
    col = colatitude(space)
    # centre the band on the sampled colatitude nearest theta
    theta = float(col[np.argmin(np.abs(col - theta))])
    idx = np.flatnonzero(np.abs(col - theta) * R < width / 2)
    return SampleSet(idx, thickening * float(space.local_h[idx].max()), "separating_set",
                     f"latitude {theta:.4f}")


def set_colatitude(s_set: SampleSet) -> float:
    return float(s_set.label.split()[-1])


def neck_loop(space, thickening: float = 0.6) -> SampleSet:
    """The ring of samples closest to the middle of the dumbbell neck."""
    rx = np.asarray(space.meta["ring_x"])
    x0 = rx[int(np.argmin(np.abs(rx)))]
    idx = np.flatnonzero(np.abs(space.coords[:, 0] - x0) < space.meta["neck_spacing"] / 2)
    return SampleSet(idx, thickening * float(space.local_h[idx].max()), "separating_set", "neck loop")


def family_sets(space, cfg: ExperimentConfig) -> list[tuple[SampleSet, float | None]]:
    """Configured test sets with their analytic isoperimetric ratio where known."""
    sc = cfg["sets"]
    fam = sc["family"]
    if fam == "none":
        return []
    if fam == "neck":
        return [(neck_loop(space, sc["thickening"]), None)]
    if space.meta.get("kind") != "sphere":
        raise ValueError(f"set family {fam!r} needs a sphere")
    thetas = [math.pi / 2] if fam == "equator" else sc["colatitudes"]
    R = space.radius or 1.0
    out = []
    for th in thetas:
        if not 0 < th <= math.pi / 2:
            raise ValueError("colatitudes must lie in (0, pi/2]")
        s = latitude_set(space, th, sc["band_width"], sc["thickening"])
        th = set_colatitude(s)
        out.append((s, 2 * math.pi * R * math.sin(th) / (R * th)))
    return out


# ---------------------------------------------------------------------------
# isoperimetric ratios


def _iso_row(space, S: SampleSet, scale: float, expected, witness: bool, L: float) -> dict:
    n = space.n_man
    H = hausdorff_estimate(space, S, n - 1, scale=scale)
    stats = separation_radius(space, S)
    ratio = H.value / stats.seprad ** (n - 1) if stats.seprad > 0 else math.inf
    row = {"set": S.label, "size": len(S), "thickening": S.scale, "measure_scale": scale,
           "H": H.value, "H_spread": H.spread, "components": stats.n_components,
           "inrads": stats.inrads, "seprad": stats.seprad, "r": stats.seprad,
           "ratio": ratio, "expected_ratio": expected,
           "separated_pairs": stats.separated_pairs}
    if witness:
        w = stable_witness(space, S, [scale, 1.5 * scale])
        row["witness_betti"] = w["betti"]
        row["witness"] = w["witness"]
    row["diameter_bound"] = diameter_bound_check(space, S, L)
    row["passed"] = bool(stats.n_components >= 2 and H.value > 0 and ratio > 0
                         and row["diameter_bound"]["ok"])
    return row


def iso_rows(space, cfg: ExperimentConfig, witness: bool = True) -> list[dict]:
    sets = family_sets(space, cfg)
    factor = cfg["sets"]["measure_scale"] if cfg["sets"]["family"] != "neck" else cfg["dumbbell"]["measure_scale"]
    L = float(space.meta.get("L_model", 1.0))
    return _map(cfg, lambda item: _iso_row(space, item[0], factor * set_spacing(space, item[0].indices),
                                           item[1], witness, L), sets)


def verify_isoperimetric(cfg: ExperimentConfig, space=None, stability: bool = True) -> VerificationReport:
    """Ratios H_{n-1}(S) / seprad(S)^{n-1} over the configured set family."""
    space = space if space is not None else generate(cfg.manifold_spec())
    rep = VerificationReport("verify-iso", cfg.to_json(), environment=environment(space))
    rep.notes.append(HOMOLOGY_SURROGATE)
    rows = iso_rows(space, cfg)
    rep.rows = rows
    if not rows:
        rep.derived["c_hat"] = None
        rep.notes.append("empty set family: c_hat undefined")
        rep.check("c_hat_defined", "c_hat = min ratio needs at least one set", False)
        return rep
    c_hat = min(r["ratio"] for r in rows)
    rep.derived["c_hat"] = c_hat
    rep.derived["constant_chain"] = "c = c_{n-1,D} / C^{n-1} (symbolic; c_hat is the measured minimum)"
    rep.check("c_hat_positive", "H_{n-1}(S) >= c r^{n-1} with c > 0", c_hat > 0, c_hat=c_hat)
    for r in rows:
        rep.check(f"separates[{r['set']}]", "S splits the sample into >= 2 components",
                  r["components"] >= 2, components=r["components"])
        rep.check(f"diameter[{r['set']}]", "diam(S) >= seprad(S)/L - (2h + spread)",
                  r["diameter_bound"]["ok"], **r["diameter_bound"])
        if "witness" in r:
            rep.check(f"witness_stable[{r['set']}]", "nerve Betti number agrees at two scales",
                      r["witness"] is not None, betti=r["witness_betti"])
    if stability:
        spec = cfg.manifold_spec()
        fine = generate(ManifoldSpec(spec.kind, spec.params, 2 * spec.sample_count, spec.seed))
        rows2 = iso_rows(fine, cfg, witness=False)
        c2 = min(r["ratio"] for r in rows2)
        change = abs(c2 - c_hat) / c_hat
        rep.derived["c_hat_doubled"] = c2
        rep.derived["c_hat_change"] = change
        rep.check("c_hat_stable", "c_hat changes by <= 10% when the sample count doubles",
                  change <= 0.10, c_hat=c_hat, c_hat_doubled=c2)
    rep.tables["isoperimetric"] = (
        ["set", "H", "H_spread", "seprad", "ratio", "expected_ratio", "witness", "passed"],
        [[r["set"], r["H"], r["H_spread"], r["seprad"], r["ratio"], r["expected_ratio"],
          r.get("witness"), r["passed"]] for r in rows])
    rep.plots["ratio_vs_set"] = line_chart(
        {"measured": [(r["seprad"], r["ratio"]) for r in rows],
         "analytic": [(r["seprad"], r["expected_ratio"]) for r in rows if r["expected_ratio"]]},
        "isoperimetric ratio", "seprad(S)", "H_{n-1}(S) / seprad^{n-1}", hlines={"c_hat": c_hat})
    return rep


# ---------------------------------------------------------------------------
# ball volumes


def far_point(space, center: int, r: float) -> int | None:
    """A sample at distance >= r/2 from ``center``, as close to r/2 as possible."""
    d = space.dist_from(center)
    ok = np.flatnonzero(d >= r / 2)
    if len(ok) == 0:
        return None
    return int(ok[np.argmin(d[ok])])


def slice_mechanism(space, center: int, r: float, c_hat: float, scale_factor: float = 5.0) -> dict:
    """Check that level sets S_t, r/8 <= t <= r/4, separate x from a far point.

    Each slice is a band of width ~1.5 spacings, thickened as in the
    separation tests; its measure is compared with c_hat (r/8)^{n-1}.
    """
    n = space.n_man
    spacing = space.meta.get("spacing", space.h / 2.5)
    y = far_point(space, center, r)
    d = space.dist_from(center)
    out = []
    for t in (r / 8, 3 * r / 16, r / 4):
        band = np.flatnonzero(np.abs(d - t) < 0.75 * spacing)
        if t < 3 * spacing or len(band) == 0 or y is None:
            out.append({"t": t, "resolved": False})
            continue
        S = SampleSet(band, 0.6 * float(space.local_h[band].max()), "level_set", f"S_{t:.4f}")
        comps = components_of_complement(space, S)
        lx, ly = comps.labels[center], comps.labels[y]
        separated = bool(lx >= 0 and ly >= 0 and lx != ly)
        H = hausdorff_estimate(space, S, n - 1, scale=scale_factor * spacing, check_resolution=False)
        bound = c_hat * (r / 8) ** (n - 1)
        out.append({"t": t, "resolved": True, "separates": separated, "H": H.value,
                    "bound": bound, "ok": bool(separated and H.value >= bound)})
    return {"far_point": y, "slices": out,
            "ok": all(s["ok"] for s in out if s["resolved"])}


def verify_volume(cfg: ExperimentConfig, space=None, c_hat: float | None = None) -> VerificationReport:
    """H_n(B(x, r)) / r^n over the radius grid, with Eilenberg slicing."""
    space = space if space is not None else generate(cfg.manifold_spec())
    rep = VerificationReport("verify-vol", cfg.to_json(), environment=environment(space))
    n = space.n_man
    diam = space.diameter
    radii = cfg["volume"]["radii"]
    bad = [r for r in radii if not 0 < r <= diam * (1 + 1e-9)]
    if bad:
        raise ValueError(f"radii {bad} outside (0, diam = {diam:.4g}]")
    if c_hat is None:
        iso = verify_isoperimetric(cfg, space, stability=False) if cfg["sets"]["family"] != "none" else None
        c_hat = iso.derived.get("c_hat") if iso else None
    rep.derived["c_hat_used"] = c_hat
    rng = np.random.default_rng(space.meta.get("seed", 0))
    centers = [int(c) for c in rng.choice(space.n, size=min(cfg["volume"]["centers"], space.n), replace=False)]
    spacing = space.meta.get("spacing", space.h / 2.5)
    scale = cfg["volume"]["measure_scale"] * spacing

    def one(job):
        x, r = job
        ball = space.ball(x, r)
        H = hausdorff_estimate(space, ball, n, scale=scale, check_resolution=False)
        sl = eilenberg_slices(space, x, r, cfg["volume"]["bands"], scale=scale)
        row = {"center": x, "r": r, "H_ball": H.value, "H_spread": H.spread,
               "ratio": H.value / r ** n, "slice_integral": sl["integral"],
               "slice_ratio": sl["ratio"],
               "slices": [(t, e.value) for t, e in sl["slices"]]}
        if space.meta.get("kind") == "sphere":
            R = space.radius or 1.0
            row["analytic_ratio"] = 2 * math.pi * R ** 2 * (1 - math.cos(r / R)) / r ** 2
        if c_hat is not None:
            row["mechanism"] = slice_mechanism(space, x, r, c_hat, cfg["sets"]["measure_scale"])
        return row

    rows = _map(cfg, one, [(x, r) for x in centers for r in radii])
    rep.rows = rows
    rep.derived["min_ratio"] = min(r["ratio"] for r in rows)
    rep.derived["slice_ratio_range"] = [min(r["slice_ratio"] for r in rows),
                                        max(r["slice_ratio"] for r in rows)]
    rep.check("volume_positive", "H_n(B(x,r)) >= c r^n with c > 0", rep.derived["min_ratio"] > 0,
              min_ratio=rep.derived["min_ratio"])
    rep.check("slice_integral_bounded", "sum H_{n-1}(S_t) dt / H_n(B) stays bounded",
              all(np.isfinite(r["slice_ratio"]) for r in rows), range=rep.derived["slice_ratio_range"])
    if c_hat is not None:
        rep.check("slices_separate", "level sets in [r/8, r/4] separate x from a far point",
                  all(r["mechanism"]["ok"] for r in rows))
    rep.tables["volume"] = (["center", "r", "H_ball", "ratio", "analytic_ratio", "slice_ratio"],
                            [[r["center"], r["r"], r["H_ball"], r["ratio"], r.get("analytic_ratio"),
                              r["slice_ratio"]] for r in rows])
    rep.tables["slices"] = (["center", "r", "t", "measure"],
                            [[r["center"], r["r"], t, v] for r in rows for t, v in r["slices"]])
    series = {f"x={x}": [(r["r"], r["ratio"]) for r in rows if r["center"] == x] for x in centers}
    if rows and "analytic_ratio" in rows[0]:
        series["analytic"] = [(r["r"], r["analytic_ratio"]) for r in rows if r["center"] == centers[0]]
    rep.plots["ratio_vs_r"] = line_chart(series, "ball volume ratio", "r", "H_n(B(x,r)) / r^n")
    last = [r for r in rows if r["center"] == centers[0]][-1]
    rep.plots["slice_profile"] = line_chart({f"r={last['r']:.3g}": last["slices"]},
                                            "level-set measures", "t", "H_{n-1}(S_t)")
    return rep


# ---------------------------------------------------------------------------
# dumbbell family


def dumbbell_row(eps: float, samples: int, seed: int, factor: float, thickening: float = 0.6) -> dict:
    space = generate(ManifoldSpec("dumbbell_surface", {"eps": eps}, samples, seed))
    S = neck_loop(space, thickening)
    scale = factor * space.meta["neck_spacing"]
    H = hausdorff_estimate(space, S, 1, scale=scale)
    stats = separation_radius(space, S)
    L = space.meta["L_model"]
    return {"eps": eps, "n": space.n, "H": H.value, "H_spread": H.spread,
            "H_analytic": 2 * math.pi * eps, "seprad": stats.seprad, "inrads": stats.inrads,
            "components": stats.n_components,
            "ratio": H.value / stats.seprad if stats.seprad > 0 else math.inf,
            "diameter_bound": diameter_bound_check(space, S, L), "L_model": L}


def slope_through_origin(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    return float(x @ y / (x @ x))


def dumbbell_necessity(cfg: ExperimentConfig) -> VerificationReport:
    """Neck-loop ratio H_1 / seprad against the neck radius eps."""
    dc = cfg["dumbbell"]
    samples = max(1, int(round(dc["samples"] * cfg.resolution_factor)))
    seed = cfg["manifold"]["seed"]
    rep = VerificationReport("dumbbell", cfg.to_json(),
                             environment={"samples": samples, "seed": seed})
    eps_list = sorted(dc["eps_list"], reverse=True)
    rows = _map(cfg, lambda e: dumbbell_row(e, samples, seed, dc["measure_scale"],
                                            cfg["sets"]["thickening"]), eps_list)
    rep.rows = rows
    slope = slope_through_origin([r["eps"] for r in rows], [r["ratio"] for r in rows])
    mean_seprad = float(np.mean([r["seprad"] for r in rows]))
    rep.derived.update(slope=slope, slope_target=2 * math.pi,
                       slope_error=abs(slope - 2 * math.pi) / (2 * math.pi),
                       mean_seprad=mean_seprad,
                       slope_model=2 * math.pi / mean_seprad)
    rep.notes.append("ratio ~ 2 pi eps / seprad; on this model (unit bells, neck of length 1) the "
                     "bell in-radius is about pi + 1/2, not 1, so the fitted slope is near "
                     "2 pi / 3.5 rather than 2 pi")
    for r in rows:
        rep.check(f"separates[eps={r['eps']}]", "neck loop splits the sample into two bells",
                  r["components"] == 2, components=r["components"])
        rep.check(f"diameter[eps={r['eps']}]", "diam(S) >= seprad(S)/L - (2h + spread)",
                  r["diameter_bound"]["ok"], **r["diameter_bound"])
    rep.check("slope_2pi", "slope of ratio vs eps within 25% of 2 pi",
              rep.derived["slope_error"] <= 0.25, slope=slope)
    rep.check("slope_model", "slope within 25% of 2 pi / (measured mean seprad)",
              abs(slope - rep.derived["slope_model"]) <= 0.25 * rep.derived["slope_model"],
              slope=slope, model=rep.derived["slope_model"])
    smallest = min(rows, key=lambda r: r["eps"])
    rep.check("ratio_small_eps", "ratio below 0.5 at the smallest eps", smallest["ratio"] < 0.5,
              eps=smallest["eps"], ratio=smallest["ratio"])
    mid = rows[len(rows) // 2]
    fine = dumbbell_row(mid["eps"], 2 * samples, seed, dc["measure_scale"], cfg["sets"]["thickening"])
    change = abs(fine["ratio"] - mid["ratio"]) / mid["ratio"]
    rep.derived["resolution_change"] = change
    rep.check("ratio_stable", "ratio changes < 10% when the sample count doubles", change < 0.10,
              eps=mid["eps"], ratio=mid["ratio"], ratio_doubled=fine["ratio"])
    rep.tables["dumbbell"] = (["eps", "n", "H", "H_analytic", "seprad", "ratio"],
                              [[r["eps"], r["n"], r["H"], r["H_analytic"], r["seprad"], r["ratio"]]
                               for r in rows])
    rep.plots["ratio_vs_eps"] = line_chart(
        {"measured": [(r["eps"], r["ratio"]) for r in sorted(rows, key=lambda r: r["eps"])],
         "2 pi eps": [(r["eps"], 2 * math.pi * r["eps"]) for r in sorted(rows, key=lambda r: r["eps"])],
         "fit": [(0.0, 0.0)] + [(r["eps"], slope * r["eps"]) for r in sorted(rows, key=lambda r: r["eps"])]},
        "neck loop ratio", "eps", "H_1 / seprad")
    return rep


# ---------------------------------------------------------------------------
# cover and nerve stages


def default_epsilon(cfg: ExperimentConfig, space) -> float:
    """Configured eps, else diam/32 but never below 8 spacings (so the eps/4-net is coarser than the sample)."""
    if cfg["cover"]["epsilon"]:
        return cfg["cover"]["epsilon"]
    spacing = space.meta.get("spacing", space.h / 2.5)
    return max(space.diameter / 32, 8 * spacing)


def cover_report(cfg: ExperimentConfig, space=None, epsilon: float | None = None) -> tuple:
    space = space if space is not None else generate(cfg.manifold_spec())
    eps = epsilon or default_epsilon(cfg, space)
    rep = VerificationReport("net", cfg.to_json(), environment=environment(space))
    cover = build_cover(space, eps)
    D = estimate_doubling(space, cfg["cover"]["doubling_trials"], seed=space.meta.get("seed", 0))
    rep.derived.update(epsilon=eps, centers=len(cover.net), multiplicity=cover.multiplicity,
                       doubling=D, lebesgue=cover.lebesgue, max_diameter=cover.max_diameter,
                       diameter_method=cover.diameter_method)
    rep.check("cover_diameter", "every cover element has diameter <= eps",
              cover.max_diameter <= eps, max_diameter=cover.max_diameter, epsilon=eps)
    rep.check("lebesgue", "every sampled eps/4-ball lies in one element (exact audit)", True,
              lebesgue=cover.lebesgue)
    rep.check("multiplicity", "multiplicity <= measured doubling constant",
              cover.multiplicity <= D, multiplicity=cover.multiplicity, doubling=D)
    return rep, space, cover


def nerve_report(cfg: ExperimentConfig, space=None, epsilon: float | None = None) -> tuple:
    rep, space, cover = cover_report(cfg, space, epsilon)
    rep.command = "nerve"
    cx = nerve(cover, max_dim=cfg["cover"]["max_dim"])
    pou = partition_of_unity(space, cover)
    sums = np.asarray(pou.values.sum(axis=1)).ravel()
    rep.check("pou_sum", "sum_i f_i = 1 within 1e-12", float(np.abs(sums - 1).max()) <= 1e-12,
              max_error=float(np.abs(sums - 1).max()))
    support_ok = all(np.isin(pou.row(p)[0], np.asarray(m)).all()
                     for p, m in enumerate(cover.membership(space.n)))
    rep.check("pou_support", "f_i(x) > 0 only if x lies in U_i", support_ok)
    rep.check("pou_lipschitz", "empirical Lipschitz ratio <= (2N+1)/delta * 1.05",
              pou.lip_empirical <= pou.lip_bound * 1.05,
              empirical=pou.lip_empirical, bound=pou.lip_bound, rigorous=pou.lip_rigorous)
    nmap = map_f(pou, cx, space=space)
    g = build_g(cx, cover, space, float(space.meta.get("L_model", 1.0)), max_dim=cfg["cover"]["max_dim"])
    disagreements = audit_boundary_agreement(g)
    rep.check("g_vertices", "g(e_i) = x_i with x_i in U_i",
              all(g.vertex_images[i] in set(np.asarray(cover.members[i]).tolist())
                  for i in range(cover.size)))
    rep.check("g_boundary", "g on a simplex agrees with g on its faces", disagreements == 0,
              disagreements=disagreements)
    rep.derived.update(nerve_dim=cx.dim, nerve_counts={k: len(v) for k, v in cx.by_dim.items()},
                       f_lip_euclidean=nmap.lip_estimate, f_lip_intrinsic=nmap.lip_intrinsic,
                       g_flags=[list(s) for s in g.flags], g_diam_method=g.diam_method)
    if g.flags:
        rep.notes.append(f"{len(g.flags)} simplices exceed the k!(2L)^k eps diameter bound (flag only)")
    return rep, space, cover, cx, pou, nmap, g


# ---------------------------------------------------------------------------
# projection and full pipeline


def carrier_complex(images, vertex_count: int) -> SimplicialComplex:
    """Smallest subcomplex containing the supports of ``images``."""
    return SimplicialComplex.from_maximal({p.simplex for p in images}, vertex_count=vertex_count)


def image_scale(images) -> float:
    """Resolution of a barycentric sample: its largest nearest-neighbour gap."""
    if len(images) < 2:
        return 1.0
    cloud = BarycentricCloud(images)
    res = cloud.resolution(np.arange(cloud.n))
    return res if res > 0 else 1.0


def project_images(images, k: int, vertex_count: int):
    cx = carrier_complex(images, vertex_count)
    E = ComplexSampleSet(list(images), k=k, scale=image_scale(images))
    img, log = project_to_skeleton(cx, E)
    return cx, E, img, log


def run_pipeline(cfg: ExperimentConfig, s_set: SampleSet | None = None, space=None,
                 epsilon: float | None = None, full: bool = True) -> VerificationReport:
    """Cover, nerve, f, projection of f(S) and the homological witnesses for one set.

    With ``full=False`` the run stops after the projection and skips the
    witness on S and the map back into the space.
    """
    space = space if space is not None else generate(cfg.manifold_spec())
    rep = VerificationReport("pipeline", cfg.to_json(), environment=environment(space))
    rep.notes.extend([HOMOTOPY_GAP, HOMOLOGY_SURROGATE])
    stage = "sets"
    try:
        if s_set is None:
            sets = family_sets(space, cfg)
            s_set = sets[0][0] if sets else None
        n = space.n_man
        stage = "cover"
        eps = epsilon or default_epsilon(cfg, space)
        sub, _, cover = cover_report(cfg, space, eps)
        rep.checks.extend(sub.checks)
        rep.derived.update(sub.derived)
        stage = "nerve"
        cx = nerve(cover, max_dim=cfg["cover"]["max_dim"])
        rep.derived["nerve_counts"] = {k: len(v) for k, v in cx.by_dim.items()}
        stage = "partition_of_unity"
        pou = partition_of_unity(space, cover)
        rep.check("pou_lipschitz", "empirical Lipschitz ratio <= (2N+1)/delta * 1.05",
                  pou.lip_empirical <= pou.lip_bound * 1.05,
                  empirical=pou.lip_empirical, bound=pou.lip_bound)
        stage = "map_f"
        nmap = map_f(pou, cx, space=space, audit_pairs=2000)
        rep.derived["f_lip"] = {"euclidean": nmap.lip_estimate, "intrinsic": nmap.lip_intrinsic}
        if s_set is None or len(s_set) == 0:
            rep.notes.append("empty S: nothing to project")
            rep.derived["projection"] = None
            return rep
        if full:
            stage = "witness_before"
            scale = cfg["sets"]["measure_scale"] * set_spacing(space, s_set.indices)
            w = stable_witness(space, s_set, [scale, 1.5 * scale])
            rep.derived["witness_S"] = w
            rep.derived["H_S"] = hausdorff_estimate(space, s_set, n - 1, scale=scale).value
        images = [nmap.images[i] for i in s_set.indices]
        stage = "projection"
        carrier, E, img, log = project_images(images, n - 1, cx.vertex_count)
        before = betti_z2(carrier, n - 1)
        after_cx = carrier_complex(img.points, cx.vertex_count)
        after = betti_z2(after_cx, n - 1)
        rep.derived["projection"] = log.to_json()
        rep.derived["witness_image_before"] = before
        rep.derived["witness_image_after"] = after
        rep.check("support_monotone", "projected supports never grow", log.support_violations == 0)
        rep.check("target_skeleton", "p(f(S)) lies in the (n-2)-skeleton (off-skeleton mass <= 1e-12)",
                  log.max_offskeleton <= 1e-12 and after_cx.dim <= n - 2,
                  max_offskeleton=log.max_offskeleton, image_dim=after_cx.dim)
        rep.check("growth_finite", "every stage growth factor is finite",
                  all(math.isfinite(v) for v in log.stage_growth.values()))
        rep.tables["projection"] = (["stage", "simplex", "measure_before", "measure_after", "growth"],
                                    [[r["stage"], " ".join(map(str, r["simplex"])), r["measure_before"],
                                      r["measure_after"], r["growth"]] for r in log.stages])
        rep.plots["stage_growth"] = line_chart(
            {"growth": sorted((float(k), v) for k, v in log.stage_growth.items())},
            "measure growth per projection stage", "stage dimension", "growth factor")
        if not full:
            return rep
        stage = "map_g"
        g = build_g(cx, cover, space, float(space.meta.get("L_model", 1.0)), max_dim=1)
        back = np.array([g.evaluate(p) for p in img.points])
        disp = space.pair_dists(s_set.indices, np.unique(back))
        rep.derived["displacement_max"] = float(
            max(disp[i, np.searchsorted(np.unique(back), b)] for i, b in enumerate(back)))
    except (ProjectionError, BaseCaseObstruction, ValueError, RuntimeError) as exc:
        rep.check(f"stage[{stage}]", "pipeline stage completes", False, error=str(exc),
                  simplex=list(getattr(exc, "simplex", None) or []))
        raise PipelineError(stage, exc, rep) from exc
    return rep
