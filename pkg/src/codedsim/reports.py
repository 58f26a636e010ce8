"""Deterministic text reports: TSV summaries and CSV curves.

Everything here is a pure function of its inputs (no timestamps, no
environment lookups), so a report is byte-identical across reruns and thread
counts.
"""

from __future__ import annotations

from .simulator import DelayStats


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def simulate_summary(stats: DelayStats, rho: float, predicted_max: float | None = None) -> str:
    lines = ["metric\tvalue"]
    lines.append(f"trials\t{stats.trials}")
    if predicted_max is not None:
        lines.append(f"predicted_max_delay_ms\t{_fmt(predicted_max)}")
    for m, mean in enumerate(stats.per_master_mean):
        lines.append(f"mean_delay_ms[master={m}]\t{_fmt(mean)}")
    lines.append(f"mean_max_delay_ms\t{_fmt(stats.mean_of_max)}")
    lines.append(f"quantile_delay_ms[rho={_fmt(rho)}]\t{_fmt(stats.quantile(rho))}")
    return "\n".join(lines) + "\n"


def compare_table(entries: list[dict], rho: float) -> str:
    header = (
        f"policy\tallocation\tpredicted_max_delay_ms\tmean_max_delay_ms\t"
        f"quantile_delay_ms[rho={_fmt(rho)}]"
    )
    lines = [header]
    for e in entries:
        lines.append(
            "\t".join(
                [
                    e["policy"],
                    e["allocation"],
                    _fmt(e["predicted_max"]),
                    _fmt(e["mean_max"]),
                    _fmt(e["quantile"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def sweep_table(rows: list[dict], num_masters: int) -> str:
    cols = ["gamma_ratio", "mean_max_delay_ms"]
    cols += [f"local_load_ratio[master={m}]" for m in range(num_masters)]
    cols.append("local_load_ratio[mean]")
    lines = ["\t".join(cols)]
    for row in rows:
        cells = [_fmt(row["ratio"]), _fmt(row["mean_max"])]
        cells += [_fmt(r) for r in row["local_ratios"]]
        cells.append(_fmt(row["local_ratio_mean"]))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def cdf_csv(stats: DelayStats, points: int = 200) -> str:
    lines = ["t_ms,cdf"]
    for t, f in stats.cdf_pairs(points):
        lines.append(f"{_fmt(t)},{_fmt(f)}")
    return "\n".join(lines) + "\n"


def trials_csv(stats: DelayStats) -> str:
    if stats.per_master_samples is None:
        raise ValueError("per-trial samples were not kept; rerun with keep_trials")
    num_masters = stats.per_master_samples.shape[1]
    header = "trial," + ",".join(f"master_{m}_ms" for m in range(num_masters)) + ",max_ms"
    lines = [header]
    for i, row in enumerate(stats.per_master_samples):
        cells = [str(i)] + [_fmt(v) for v in row] + [_fmt(row.max())]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
