"""Figure-ready data: sweep records as CSV, box-plot summaries, correlations."""
import csv
import json
import math
import os

import numpy as np

from ..inference import AgentPrior, McmcConfig, Observation, posterior_corr, sample_posterior
from ..inference.posterior import _jsonable
from ..plate import HYPER_NAMES
from .sweep import WITH_DS, WITHOUT_DS, SweepRecord

CSV_COLUMNS = ("grid_value", "replicate", "arm", "x_new", "pred", "cate_mean", "cate_std",
               "dose", "outcome_y", "in_gray_band", "rhat_max", "flagged")
QUARTILE_METHOD = "linear"
RECORDS_FILE = "sweep_records.csv"
SUMMARY_FILE = "sweep_summary.json"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for rec in records:
            w.writerow([_fmt(getattr(rec, c)) for c in CSV_COLUMNS])


def read_records_csv(path):
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(SweepRecord(
                grid_value=float(row["grid_value"]), replicate=int(row["replicate"]),
                arm=row["arm"], x_new=float(row["x_new"]),
                pred=float(row["pred"]) if row["pred"] else None,
                cate_mean=float(row["cate_mean"]), cate_std=float(row["cate_std"]),
                dose=float(row["dose"]), outcome_y=float(row["outcome_y"]),
                in_gray_band=row["in_gray_band"] == "true",
                rhat_max=float(row["rhat_max"]), flagged=row["flagged"] == "true"))
    return records


def box_stats(values):
    """Mean, std and quartiles (numpy "linear" interpolation)."""
    v = np.asarray(values, float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return {"n": 0}
    q1, med, q3 = np.percentile(v, [25, 50, 75], method=QUARTILE_METHOD)
    return {"n": int(v.size), "mean": float(v.mean()),
            "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "min": float(v.min()), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v.max())}


def summarize(records):
    groups = {}
    for rec in records:
        groups.setdefault((rec.grid_value, rec.arm), []).append(rec)
    summary = []
    for (gv, arm), recs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        doses = np.array([r.dose for r in recs])
        summary.append({
            "grid_value": gv, "arm": arm, "replicates": len(recs),
            "cate": box_stats([r.cate_mean for r in recs]),
            "outcome_y": box_stats([r.outcome_y for r in recs]),
            "dose_mean": float(np.nanmean(doses)) if len(doses) else None,
            "in_gray_band_fraction": float(np.mean([r.in_gray_band for r in recs])),
            "flagged": int(sum(r.flagged for r in recs)),
        })
    contrasts = []
    by_key = {(r.grid_value, r.replicate, r.arm): r for r in records}
    for gv in sorted({r.grid_value for r in records}):
        d_wo, d_hist_w, d_hist_wo = [], [], []
        for (g, rep, arm), rec in by_key.items():
            if g != gv or arm != WITH_DS:
                continue
            other = by_key.get((g, rep, WITHOUT_DS))
            if other is not None:
                d_wo.append(rec.outcome_y - other.outcome_y)
                d_hist_wo.append(other.outcome_y - other.outcome_hist)
            d_hist_w.append(rec.outcome_y - rec.outcome_hist)
        contrasts.append({
            "grid_value": gv,
            "with_minus_without": _nanmean(d_wo),
            "with_minus_historical": _nanmean(d_hist_w),
            "without_minus_historical": _nanmean(d_hist_wo),
        })
    return summary, contrasts


def _nanmean(v):
    v = np.asarray(v, float)
    v = v[~np.isnan(v)]
    return float(v.mean()) if v.size else None


def emit_figure_data(records, path):
    """Write the long-form CSV and the per-(grid value, arm) JSON summary.

    ``path`` is a directory; returns the two file paths.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    os.makedirs(path, exist_ok=True)
    csv_path = os.path.join(path, RECORDS_FILE)
    json_path = os.path.join(path, SUMMARY_FILE)
    write_records_csv(records, csv_path)
    summary, contrasts = summarize(records)
    payload = {
        "meta": {"quartile_method": QUARTILE_METHOD, "columns": list(CSV_COLUMNS),
                 "arms": [WITH_DS, WITHOUT_DS]},
        "summary": summary,
        "contrasts": contrasts,
    }
    with open(json_path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def correlation_report(prior: AgentPrior, obs: Observation, seed=0, mcmc: McmcConfig = McmcConfig(),
                       scm_constants=(12.0, -0.1, 0.125), n=1000, out_dir=None):
    """Pairwise posterior correlations of the seven hyperparameters.

    Returns ``(names, matrix, scatter)`` where ``scatter`` is an array of
    pooled ``(n_e, alpha_a_mu)`` draws. With ``out_dir`` the matrix is
    written as JSON and the scatter as CSV.
    """
    samples = sample_posterior(prior, obs, mcmc, seed=seed, scm_constants=scm_constants, n=n)
    names = HYPER_NAMES
    k = len(names)
    mat = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            mat[i, j] = mat[j, i] = posterior_corr(samples, names[i], names[j])
    scatter = np.column_stack([samples.pooled("n_e"), samples.pooled("alpha_a_mu")])
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "posterior_correlation.json"), "w") as fh:
            json.dump(_jsonable({"names": list(names), "matrix": mat.tolist(),
                                 "rhat_max": samples.rhat_max}), fh, indent=2)
            fh.write("\n")
        with open(os.path.join(out_dir, "scatter_n_e_alpha_a_mu.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n_e", "alpha_a_mu"])
            for a, b in scatter.tolist():
                w.writerow([repr(a), repr(b)])
    return names, mat, scatter
