"""Report files: CSV tables, JSON summaries, plot-ready polylines and PNG figures.

Layout of an output directory::

    summary.json             build hashes, timings, checks, analysis verdicts
    scenario.json            the scenario as run
    limits.csv               family,index,direction,w_r,w_s,hausdorff,diagnostic,centroid_r,centroid_s
    clouds/<dir>_f<n>_<i>.csv    step,r,s   limit-set cloud (orbit tail)
    orbits/f<n>_<i>.csv          step,r,s   orbit trace from step 0
    certificate.csv          center_r,center_s,direction,best_separation,passed
    certificate.json         witnesses and separation matrices
    entropy.csv              n,count
    geometry.csv             object,index,vertex,r,s   (target, cable, hutch polylines)
    maps/                    map expression documents and collapse meshes
    *.png                    figures of the above

File names depend only on the scenario, so identical runs give identical files.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .map_algebra import orbit_arrays, to_document

THRESHOLDS = {"limit_hausdorff": 0.05, "entropy_slope": 0.05, "plane_error": 1e-9}
PNG_META = {"Software": None}


def _num(x):
    return repr(float(x))


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, default=_jsonable) + "\n")


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])


def verdicts(arts, results: dict) -> dict:
    """Pass/fail per check that was run."""
    out = {}
    st = arts.checks.get("steering")
    if st is not None:
        out["steering"] = bool(st["passed"])
    if "permeation" in arts.checks:
        out["permeation"] = all(a["passed"] for a in arts.checks["permeation"])
    if "limits" in results:
        out["limits"] = all(r["hausdorff"] < THRESHOLDS["limit_hausdorff"] for r in results["limits"])
    if "certificate" in results:
        out["certificate"] = results["certificate"].passed
    if "nonwandering" in results:
        out["nonwandering"] = results["nonwandering"].passed
    if "entropy" in results:
        out["entropy"] = results["entropy"].slope < THRESHOLDS["entropy_slope"]
    if "plane" in results:
        out["plane"] = results["plane"]["max_relative_error"] < THRESHOLDS["plane_error"]
    if "annulus" in results:
        a = results["annulus"]
        out["annulus_witnesses"] = a["witness_search"].passed
        out["annulus_not_sensitive"] = not a["certificate"].passed
    return out


def _steering_summary(rep: dict) -> dict:
    return {k: v for k, v in rep.items() if k != "stage_gaps"} | \
        {"max_stage_gap": max(rep.get("stage_gaps") or [0.0])}


def build_summary(arts) -> dict:
    from .pipeline import FINITE_FAMILY_NOTE
    sc = arts.scenario
    out = {"name": sc.name, "mode": sc.mode, "note": FINITE_FAMILY_NOTE, "hashes": arts.hashes,
           "families": sc.m}
    if "steering" in arts.checks:
        out["steering"] = _steering_summary(arts.checks["steering"])
    if "permeation" in arts.checks:
        out["permeation"] = arts.checks["permeation"]
    if arts.spec is not None:
        out["rising"] = arts.spec.to_dict()
    if arts.placement is not None:
        out["placement"] = {"mu": arts.placement.mus, "delta": arts.placement.deltas,
                            "hutch_diameters": [h.disc.diameter for h in arts.placement.hutches]}
    return out


def write_maps(arts, out: Path) -> list[Path]:
    """Map documents; collapse meshes go to separate files referenced by name."""
    d = out / "maps"
    d.mkdir(parents=True, exist_ok=True)
    files = []
    if arts.xi is not None:
        refs = []
        for i, p in enumerate(arts.xi.members):
            name = f"mesh_{i}.json"
            p.save_mesh(d / name)
            refs.append(name)
            files.append(d / name)
        arts.xi.refs = tuple(refs)
    for key in ("psi", "phi", "f", "h"):
        m = getattr(arts, key)
        if m is None:
            continue
        write_json(d / f"{key}.json", to_document(m))
        files.append(d / f"{key}.json")
    return files


def geometry_rows(arts):
    rows = []
    if arts.placement is None:
        return rows
    for i, h in enumerate(arts.placement.hutches):
        for j, v in enumerate(np.vstack([h.disc.vertices, h.disc.vertices[:1]])):
            rows.append(("hutch", i, j, v[0], v[1]))
        for j, v in enumerate(arts.placement.cables[i]):
            rows.append(("cable", i, j, v[0], v[1]))
        T = h.X.tree
        for k, (a, b) in enumerate(T.segments):
            rows.append((f"target_edge_{k}", i, 0, a[0], a[1]))
            rows.append((f"target_edge_{k}", i, 1, b[0], b[1]))
    return rows


def emit_reports(arts, results: dict, out, orbit_steps: int = 200) -> dict:
    """Write every report file; returns the summary dictionary."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    sc = arts.scenario
    write_json(out / "scenario.json", sc.to_dict())
    summary = build_summary(arts)
    summary["verdicts"] = verdicts(arts, results)
    summary["passed"] = all(summary["verdicts"].values())
    write_csv(out / "geometry.csv", ["object", "index", "vertex", "r", "s"], geometry_rows(arts))

    if "limits" in results:
        rows = results["limits"]
        write_csv(out / "limits.csv", ["family", "index", "direction", "w_r", "w_s", "hausdorff", "diagnostic",
                                       "centroid_r", "centroid_s"],
                  [(r["family"], r["index"], r["direction"], r["w_r"], r["w_s"], r["hausdorff"], r["diagnostic"],
                    r["centroid_r"], r["centroid_s"]) for r in rows])
        for r in rows:
            write_csv(out / "clouds" / f"{r['direction']}_f{r['family']}_{r['index']}.csv", ["step", "r", "s"],
                      r["estimate"].to_rows())
        summary["limits"] = {"count": len(rows), "max_hausdorff": max(r["hausdorff"] for r in rows),
                             "max_diagnostic": max(r["diagnostic"] for r in rows)}
        _orbit_traces(arts, out, orbit_steps)
        _plot_limits(arts, rows, out / "limits.png")
    if "certificate" in results:
        cert = results["certificate"]
        write_json(out / "certificate.json", cert.to_dict())
        write_csv(out / "certificate.csv", ["center_r", "center_s", "direction", "best_separation", "passed"],
                  [(r.center[0], r.center[1], d, r.best[d], int(r.passed)) for r in cert.centers
                   for d in cert.directions])
        summary["certificate"] = {"passed": cert.passed, "n": cert.n, "c": cert.c, "radius": cert.radius,
                                  "centers": len(cert.centers), "failure": cert.failure_report(),
                                  "min_best": min(min(r.best.values()) for r in cert.centers)}
        _plot_certificate(cert, out / "certificate.png")
    if "nonwandering" in results:
        summary["nonwandering"] = results["nonwandering"].to_dict()
    if "entropy" in results:
        e = results["entropy"]
        summary["entropy"] = e.to_dict()
        write_csv(out / "entropy.csv", ["n", "count"], [(i + 1, int(c)) for i, c in enumerate(e.counts)])
        _plot_entropy(e, out / "entropy.png")
    if "plane" in results:
        summary["plane"] = results["plane"]
    if "annulus" in results:
        a = results["annulus"]
        summary["annulus"] = {"witness_best": a["witness_search"].best, "witness_passed": a["witness_search"].passed,
                              "witnesses": a["witness_search"].witnesses,
                              "certificate_failure": a["certificate"].failure_report(),
                              "failing_centers": a["failing_centers"],
                              "centers": len(a["certificate"].centers)}
        write_csv(out / "certificate.csv", ["center_r", "center_s", "direction", "best_separation", "passed"],
                  [(r.center[0], r.center[1], d, r.best[d], int(r.passed)) for r in a["certificate"].centers
                   for d in a["certificate"].directions])
        _plot_certificate(a["certificate"], out / "certificate.png")
    write_json(out / "summary.json", summary)
    return summary


def _orbit_traces(arts, out: Path, steps: int) -> None:
    pts = arts.test_points(1)
    for n, P in enumerate(pts):
        if not len(P):
            continue
        O = orbit_arrays(arts.psi, P[:1], 0, steps)[:, 0, :]
        write_csv(out / "orbits" / f"f{n}_0.csv", ["step", "r", "s"],
                  [(k, O[k, 0], O[k, 1]) for k in range(len(O))])


def _square_axes(ax):
    ax.plot([-1, 1, 1, -1, -1], [-1, -1, 1, 1, -1], color="0.3", lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlim(-1.05, 1.05)
    ax.set_ylim(-1.05, 1.05)
    ax.set_xlabel("r")
    ax.set_ylabel("s")


def _plot_limits(arts, rows, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 6))
    _square_axes(ax)
    if arts.placement is not None:
        for h, cab in zip(arts.placement.hutches, arts.placement.cables):
            V = np.vstack([h.disc.vertices, h.disc.vertices[:1]])
            ax.plot(V[:, 0], V[:, 1], color="tab:gray", lw=0.6)
            ax.plot(cab[:, 0], cab[:, 1], color="tab:brown", lw=0.8)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for n, P in enumerate(arts.test_points(1)):
        if len(P):
            O = orbit_arrays(arts.psi, P[:1], 0, 60)[:, 0, :]
            ax.plot(O[:, 0], O[:, 1], ".-", ms=2, lw=0.4, color=colors[n % len(colors)])
    for r in rows:
        c = r["estimate"].cloud.points
        ax.plot(c[:, 0], c[:, 1], ".", ms=3, color=colors[r["family"] % len(colors)])
    ax.set_title(f"{arts.scenario.name}: orbits and limit clouds")
    fig.savefig(path, dpi=110, metadata=PNG_META)
    plt.close(fig)


def _plot_certificate(cert, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    C = np.array([r.center for r in cert.centers])
    best = np.array([min(r.best.values()) for r in cert.centers])
    sc = ax.scatter(C[:, 0], C[:, 1], c=best, cmap="viridis", s=60,
                    marker="o", edgecolors=["k" if r.passed else "r" for r in cert.centers])
    fig.colorbar(sc, ax=ax, label="best separation")
    ax.set_title(f"({','.join(cert.directions)}, {cert.n})-certificate, c = {cert.c:.3g}")
    ax.set_aspect("equal")
    fig.savefig(path, dpi=110, metadata=PNG_META)
    plt.close(fig)


def _plot_entropy(e, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    n = np.arange(1, len(e.counts) + 1)
    ax.semilogy(n, e.counts, "o-", ms=3)
    ax.set_xlabel("n")
    ax.set_ylabel("separated-set size")
    ax.set_title(f"heuristic growth, slope {e.slope:.4f}")
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=PNG_META)
    plt.close(fig)
