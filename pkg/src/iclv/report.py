"""Text and CSV rendering of estimation results, summaries, and effects.

The estimation table follows the journal-style layout: one row per estimated
coefficient with significance stars, then a model summary block with the
observation count, rho-squared, adjusted rho-squared, and BIC.
"""

import numpy as np


def _stars(t):
    if t is None or not np.isfinite(t):
        return ""
    at = abs(t)
    if at >= 2.576:
        return "***"
    if at >= 1.960:
        return "**"
    if at >= 1.645:
        return "*"
    return ""


def render_estimation(result):
    lines = [f"{'Variable':<38}{'Coef.':>12}{'t-stat':>12}",
             "-" * 62]
    for name, se, t in zip(result.free_names, result.std_errors, result.t_stats):
        coef = result.params[name]
        t_txt = f"{t:.2f}" if np.isfinite(t) else "n/a"
        lines.append(f"{name:<38}{coef:>12.4f}{t_txt:>9}{_stars(t):<3}")
    lines += [
        "",
        "Model summary:",
        f"{'Number of observations':<38}{result.n_observations:>12d}",
        f"{'Number of choice tasks':<38}{result.n_tasks:>12d}",
        f"{'Number of indicator responses':<38}{result.n_indicator_responses:>12d}",
        f"{'Free parameters':<38}{result.n_free_parameters:>12d}",
        f"{'Log-likelihood (final)':<38}{result.ll_final:>12.2f}",
        f"{'Log-likelihood (null)':<38}{result.ll_null:>12.2f}",
        f"{'Rho-squared':<38}{result.rho2:>12.4f}",
        f"{'Adj.Rho-squared':<38}{result.adj_rho2:>12.4f}",
        f"{'BIC':<38}{result.bic:>12.2f}",
        f"{'Simulation draws':<38}{result.draws:>12d}",
        f"{'Converged':<38}{str(result.converged).lower():>12}",
    ]
    if result.singular_params:
        lines.append("Weakly identified: " + ", ".join(result.singular_params))
    lines.append("Note: *** |t|>2.576, ** |t|>1.960, * |t|>1.645")
    return "\n".join(lines) + "\n"


def render_summary(summary):
    lines = [f"Respondents: {summary.n_respondents}",
             f"Choice tasks: {summary.n_tasks}",
             f"Alternatives: {summary.n_alternatives}",
             "",
             f"{'Alternative':<22}{'Share':>10}"]
    for label, share in summary.shares.items():
        lines.append(f"{label:<22}{share:>10.4f}")
    if summary.indicator_means:
        lines += ["", f"{'Indicator':<10}" + "".join(f"{c:>8}" for c in range(1, 6))
                  + f"{'Mean':>9}{'Std.':>9}"]
        for name, dist in summary.indicator_distributions.items():
            total = max(sum(dist), 1)
            row = f"{name:<10}" + "".join(f"{100 * c / total:>8.2f}" for c in dist)
            row += f"{summary.indicator_means[name]:>9.2f}"
            row += f"{summary.indicator_sds[name]:>9.2f}"
            lines.append(row)
    if summary.sociodemo_means:
        lines += ["", f"{'Variable':<22}{'Mean':>10}{'Std.':>10}"]
        for name in summary.sociodemo_means:
            lines.append(f"{name:<22}{summary.sociodemo_means[name]:>10.4f}"
                         f"{summary.sociodemo_sds[name]:>10.4f}")
    return "\n".join(lines) + "\n"


def render_effects(results):
    lines = [f"{'Attribute':<18}{'Alternative':<20}{'Marg.effect':>12}"
             f"{'Elasticity':>12}  {'Averaging':<15}"]
    for r in results:
        elast = f"{r.elasticity:.3f}" if r.elasticity is not None else "-"
        lines.append(f"{r.attribute:<18}{r.alternative:<20}"
                     f"{r.marginal_effect:>12.3f}{elast:>12}  {r.averaging:<15}")
    return "\n".join(lines) + "\n"


def effects_csv(results):
    lines = ["attribute,alternative,marginal_effect,elasticity,method,averaging"]
    for r in results:
        elast = "" if r.elasticity is None else repr(r.elasticity)
        lines.append(f"{r.attribute},{r.alternative},{r.marginal_effect!r},"
                     f"{elast},{r.method},{r.averaging}")
    return "\n".join(lines) + "\n"


def render_design_report(design, report):
    lines = [f"Runs: {design.n_runs}",
             f"Max |pairwise correlation| (effect-coded): "
             f"{report.max_abs_correlation:.4f}",
             f"D-efficiency (main effects): {report.d_efficiency:.4f}",
             f"Level imbalance beyond feasible floor: {report.imbalance}",
             "",
             f"{'Attribute':<22}Level counts"]
    for name, counts in report.level_counts.items():
        lines.append(f"{name:<22}{counts}")
    if design.blocks is not None:
        lines += ["", f"Blocks: {len(design.blocks)} x {len(design.blocks[0])} runs"]
    return "\n".join(lines) + "\n"


def design_csv(design):
    header = ["scenario", "block"] + [a.name for a in design.attribute_defs]
    block_of = {}
    if design.blocks is not None:
        for b, members in enumerate(design.blocks):
            for r in members:
                block_of[r] = b
    values = design.level_values()
    lines = [",".join(header)]
    for r in range(design.n_runs):
        row = [str(r), str(block_of.get(r, 0))]
        row += [repr(float(v)) for v in values[r]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def render_psych(block, alphas, kmo_overall, kmo_items, efa_result):
    lines = ["Reliability and validity of the indicator block", ""]
    lines.append(f"{'Scale':<20}{'Items':>6}{'Cronbach alpha':>16}")
    for scale, (items, alpha) in alphas.items():
        lines.append(f"{scale:<20}{len(items):>6}{alpha:>16.3f}")
    lines += ["", f"Overall KMO: {kmo_overall:.3f}", "",
              f"{'Item':<8}{'KMO':>8}  " +
              "".join(f"{'F' + str(f + 1):>8}" for f in
                      range(efa_result.loadings.shape[1])) + f"{'Commun.':>10}"]
    for i, name in enumerate(efa_result.item_names):
        row = f"{name:<8}{kmo_items[i]:>8.3f}  "
        row += "".join(f"{v:>8.3f}" for v in efa_result.loadings[i])
        row += f"{efa_result.communalities[i]:>10.3f}"
        lines.append(row)
    ev = ", ".join(f"{v:.3f}" for v in efa_result.explained_variance)
    lines.append(f"\nExplained variance per factor: {ev}")
    return "\n".join(lines) + "\n"
