"""Command-line front end.

Subcommands: design, simulate, estimate, effects, psych, report, summarize.
Logs go to standard error; data goes to files or standard output. Every
stochastic subcommand takes --seed and is reproducible under it; --threads
(or the ICLV_THREADS environment variable) caps worker processes for batch
work and never changes numerical results.

Exit codes: 0 success, 1 validation or usage error, 2 estimation finished
without meeting the convergence criteria (results are still written).
"""

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import presets, report
from .data import DatasetError, load_dataset, save_dataset, summarize
from .design import AttributeDef, DesignError, block_design, generate_design, orthogonality_report
from .draws import DrawPlan
from .effects import FittedModel, effects_table
from .estimation import estimate, load_result_kv
from .model import (ModelSpecError, OptimizerOptions, build_parameters,
                    parse_model_file, write_model_file, ModelFile)
from .psychometrics import (PsychometricsError, cronbach_alpha, efa,
                            item_block_from_dataset, kmo)
from .simulate import simulate_dataset

log = logging.getLogger("iclv")


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("ICLV_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _load_data(args, spec):
    return load_dataset(args.choices, args.respondents,
                        indicators=spec.indicator_names() or (),
                        base=spec.base, columns=spec.columns)


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def cmd_design(args):
    if args.attribute:
        attrs = []
        for spec_str in args.attribute:
            name, _, levels = spec_str.partition(":")
            if not levels:
                raise DesignError(
                    f"--attribute '{spec_str}': expected name:level,level,...")
            attrs.append(AttributeDef(name, tuple(float(v)
                                                  for v in levels.split(","))))
        attrs = tuple(attrs)
    else:
        attrs = presets.experiment_attributes()
    design = generate_design(attrs, args.runs, seed=args.seed)
    if args.block_size:
        design = block_design(design, args.block_size, seed=args.seed)
    diagnostics = report.render_design_report(design,
                                              orthogonality_report(design))
    csv_text = report.design_csv(design)
    if args.out:
        _write(args.out, csv_text)
        sys.stdout.write(diagnostics)
    else:
        sys.stdout.write(csv_text)
        sys.stderr.write(diagnostics)
    return 0


def cmd_simulate(args):
    cfg = presets.reference_truth_config(
        n_respondents=args.respondents, tasks_per_respondent=args.tasks,
        seed=args.seed, with_latents=not args.no_latents)
    ds = simulate_dataset(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(ds, out / "choices.csv", out / "respondents.csv",
                 columns=cfg.spec.columns)
    truth_lines = [f"param.{name} = {cfg.truth[name]!r}"
                   for name in cfg.truth.names]
    _write(out / "truth.kv", "\n".join(truth_lines) + "\n")
    write_model_file(ModelFile(spec=cfg.spec,
                               plan=DrawPlan(draws=args.draws, seed=args.seed),
                               options=OptimizerOptions()),
                     out / "model.spec")
    log.info("simulated %d respondents x %d tasks into %s",
             args.respondents, args.tasks, out)
    return 0


def _plan_from_args(mf, args):
    plan = mf.plan
    updates = {}
    if args.draws is not None:
        updates["draws"] = args.draws
    if args.sequence is not None:
        updates["sequence"] = args.sequence
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.unit is not None:
        updates["unit"] = args.unit
    if updates:
        from dataclasses import replace
        plan = replace(plan, **updates)
    return plan


def cmd_estimate(args):
    mf = parse_model_file(args.spec)
    ds = _load_data(args, mf.spec)
    plan = _plan_from_args(mf, args)
    options = mf.options
    if args.robust_se or args.observations:
        from dataclasses import replace
        if args.robust_se:
            options = replace(options, robust_se=True)
        if args.observations:
            options = replace(options, observation_unit=args.observations)
    log.info("estimating %d free parameters on %d tasks (%d draws, %s; "
             "worker cap %d)", build_parameters(mf.spec).n_free(), ds.n_tasks,
             plan.draws, plan.sequence, _threads(args))
    result = estimate(mf.spec, ds, plan, options, start=mf.start)
    _write(f"{args.out}.kv", result.to_kv())
    _write(f"{args.out}.txt", report.render_estimation(result))
    if not result.converged:
        log.warning("estimation did not converge (gradient norm %.2e)",
                    result.gradient_norm)
        return 2
    return 0


def cmd_effects(args):
    mf = parse_model_file(args.spec)
    ds = _load_data(args, mf.spec)
    kv = load_result_kv(args.params)
    params = build_parameters(mf.spec)
    values = {k[len("param."):]: float(v) for k, v in kv.items()
              if k.startswith("param.")}
    params = params.with_values(values)
    plan = _plan_from_args(mf, args)
    model = FittedModel(mf.spec, params, plan)
    rows = effects_table(model, ds, averaging=args.averaging)
    if args.out:
        _write(f"{args.out}.csv", report.effects_csv(rows))
        _write(f"{args.out}.txt", report.render_effects(rows))
    else:
        sys.stdout.write(report.render_effects(rows))
    return 0


def cmd_psych(args):
    mf = parse_model_file(args.spec)
    ds = _load_data(args, mf.spec)
    scales = {latent.name: mf.spec.indicators_of(latent.name)
              for latent in mf.spec.latents}
    block = item_block_from_dataset(ds, scales)
    alphas = {name: (items, cronbach_alpha(block, items))
              for name, items in scales.items() if len(items) >= 2}
    overall, per_item = kmo(block)
    n_factors = max(len(mf.spec.latents), 1)
    result = efa(block, n_factors)
    text = report.render_psych(block, alphas, overall, per_item, result)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args):
    kv = load_result_kv(args.results)
    lines = [f"{'Variable':<38}{'Coef.':>12}{'t-stat':>12}", "-" * 62]
    for key, value in kv.items():
        if not key.startswith("t."):
            continue
        name = key[2:]
        coef = float(kv[f"param.{name}"])
        t = float(value)
        t_txt = f"{t:.2f}" if np.isfinite(t) else "n/a"
        star = report._stars(t)
        lines.append(f"{name:<38}{coef:>12.4f}{t_txt:>9}{star:<3}")
    lines += ["", "Model summary:"]
    for label, key, fmt in (
            ("Number of observations", "n_observations", "{:>12d}"),
            ("Log-likelihood (final)", "ll_final", "{:>12.2f}"),
            ("Log-likelihood (null)", "ll_null", "{:>12.2f}"),
            ("Rho-squared", "rho2", "{:>12.4f}"),
            ("Adj.Rho-squared", "adj_rho2", "{:>12.4f}"),
            ("BIC", "bic", "{:>12.2f}")):
        if key in kv:
            value = float(kv[key]) if "d" not in fmt else int(kv[key])
            lines.append(f"{label:<38}" + fmt.format(value))
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def cmd_summarize(args):
    mf = parse_model_file(args.spec)
    ds = _load_data(args, mf.spec)
    text = report.render_summary(summarize(ds))
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iclv",
        description="Estimation engine for integrated choice and latent "
                    "variable (ICLV) models with a multinomial logit kernel.")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker cap for batch work (ICLV_THREADS)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="generate a near-orthogonal design")
    p.add_argument("--runs", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block-size", type=int, default=4)
    p.add_argument("--attribute", action="append",
                   help="name:level,level,... (repeatable; default: bundled "
                        "reference attributes)")
    p.add_argument("--out", help="CSV path (diagnostics then go to stdout)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="simulate a dataset from the bundled "
                                        "reference truth")
    p.add_argument("--respondents", type=int, default=551)
    p.add_argument("--tasks", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=500,
                   help="draw count written into the emitted model file")
    p.add_argument("--no-latents", action="store_true",
                   help="simulate from the plain logit variant")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="maximum simulated likelihood fit")
    p.add_argument("--choices", required=True)
    p.add_argument("--respondents", required=True)
    p.add_argument("--spec", required=True, help="model specification file")
    p.add_argument("--out", required=True, help="output prefix (.kv, .txt)")
    p.add_argument("--draws", type=int)
    p.add_argument("--sequence", choices=("halton", "pseudo"))
    p.add_argument("--unit", choices=("respondent", "task"))
    p.add_argument("--seed", type=int)
    p.add_argument("--robust-se", action="store_true")
    p.add_argument("--observations", choices=("tasks", "tasks_and_indicators"))
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("effects", help="marginal effects and elasticities")
    p.add_argument("--choices", required=True)
    p.add_argument("--respondents", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--params", required=True, help="estimation .kv file")
    p.add_argument("--averaging", choices=("sample_average", "at_means"),
                   default="sample_average")
    p.add_argument("--draws", type=int)
    p.add_argument("--sequence", choices=("halton", "pseudo"))
    p.add_argument("--unit", choices=("respondent", "task"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output prefix (.csv, .txt)")
    p.set_defaults(func=cmd_effects)

    p = sub.add_parser("psych", help="reliability and validity report")
    p.add_argument("--choices", required=True)
    p.add_argument("--respondents", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_psych)

    p = sub.add_parser("report", help="render an estimation result file")
    p.add_argument("--results", required=True, help=".kv file from estimate")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("summarize", help="dataset counts, shares, moments")
    p.add_argument("--choices", required=True)
    p.add_argument("--respondents", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DatasetError, ModelSpecError, DesignError, PsychometricsError,
            FileNotFoundError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
