"""Command-line pipeline: fit -> optimize -> backtest -> metrics, plus simulate.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.  Failures
print one JSON object on stderr, e.g.
``{"error": "DataError", "message": "...", "exit_code": 2}``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import persist
from .asymptotics import SimulationRun, check_finite_n_bound, check_lln, check_markov_bound
from .errors import DataError, DomainError, OptimizationFailedError, UnsupportedError
from .estimation import fit_mle, gaussian_baseline_config
from .ingest import load_prices
from .numerics import METHODS
from .optimizer import Portfolio, optimal_portfolio
from .wealth_metrics import BacktestReport, backtest, daily_returns, sharpe_ratio, sortino_ratio

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message, EXIT_USAGE)
        raise SystemExit(EXIT_USAGE)


def _emit_error(kind, message, code):
    print(json.dumps({"error": kind, "message": str(message), "exit_code": code}), file=sys.stderr)


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else None


def _config(args):
    cfg = persist.load_config(getattr(args, "config", None))
    de, integ = cfg.de, cfg.integrator
    if getattr(args, "seed", None) is not None:
        de = replace(de, seed=args.seed)
        integ = replace(integ, seed=args.seed)
    if getattr(args, "workers", None) is not None:
        de = replace(de, workers=args.workers)
    if getattr(args, "method", None) is not None:
        integ = replace(integ, method=args.method)
    return persist.PipelineConfig(replace(cfg.fit, de=de), de, integ)


def _fit(data, cfg, baseline=False):
    fit_cfg = gaussian_baseline_config(cfg.fit) if baseline else cfg.fit
    return fit_mle(data, fit_cfg)


def cmd_fit(args):
    cfg = _config(args)
    data = load_prices(args.input, _split(args.tickers), (args.date_from, args.date_to))
    fit = _fit(data, cfg)
    persist.save_fit(args.out, fit)
    m = fit.model
    print(f"fitted q={m.q:.6g} on {data.n} days x {data.d} tickers; log-likelihood {fit.log_likelihood:.6f}"
          f"{'' if fit.converged else ' (DE hit max_generations)'}")
    return 0


def _optimize(fit, cfg):
    res = optimal_portfolio(fit.model, cfg.integrator, cfg.de)
    return persist.SavedPortfolio(res.portfolio, fit.tickers, res.growth, fit.model.q)


def cmd_optimize(args):
    cfg = _config(args)
    fit = persist.load_fit(args.model)
    saved = _optimize(fit, cfg)
    persist.save_portfolio(args.out, saved)
    w = ", ".join(f"{t}={v:.4f}" for t, v in zip(saved.tickers, saved.portfolio.weights))
    print(f"b*: {w}; W*_q = {saved.growth.value:.6e} (+/- {saved.growth.std_error:.1e})")
    return 0


def _summary_record(report: BacktestReport, tickers):
    t = report.trajectory
    return {
        "tickers": list(tickers),
        "weights": list(report.portfolio.weights),
        "q": report.model.q,
        "window": [report.window[0].isoformat(), report.window[1].isoformat()],
        "days": len(t),
        "final_wealth": float(t.wealth[-1]),
        "final_q_wealth": float(t.q_wealth[-1]),
        "sharpe": report.sharpe,
        "sortino": report.sortino,
    }


def _plot(path, reports):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed hash salt and no timestamp keep the SVG byte-stable
    with matplotlib.rc_context({"svg.hashsalt": "qportfolio", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        for label, rep in reports:
            t = rep.trajectory
            ax.plot(t.days, t.wealth, label=f"{label} wealth")
            ax.plot(t.days, t.q_wealth, linestyle="--", label=f"{label} q-wealth")
        ax.set_xlabel("date")
        ax.set_ylabel("wealth relative")
        ax.legend()
        fig.autofmt_xdate()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _sibling(out, suffix):
    out = Path(out)
    return out.with_name(out.stem + suffix)


def cmd_backtest(args):
    cfg = _config(args)
    fit = persist.load_fit(args.model)
    saved = persist.load_portfolio(args.portfolio)
    if fit.tickers and tuple(fit.tickers) != tuple(saved.tickers):
        raise DataError("model and portfolio were built for different tickers")
    data = load_prices(args.input, saved.tickers, (args.date_from, args.date_to))
    report = backtest(saved.portfolio, fit.model, data)
    persist.write_trajectory_csv(args.out, report.trajectory)
    summary = {"q_portfolio": _summary_record(report, saved.tickers)}
    reports = [("q-portfolio", report)]

    if args.baseline == "gaussian":
        start, end = fit.window if fit.window else (None, None)
        train = load_prices(args.input, saved.tickers, (start, end))
        base_fit = _fit(train, cfg, baseline=True)
        base = _optimize(base_fit, cfg)
        base_report = backtest(base.portfolio, base_fit.model, data)
        persist.write_trajectory_csv(_sibling(args.out, ".baseline.csv"), base_report.trajectory)
        summary["gaussian_baseline"] = _summary_record(base_report, saved.tickers)
        summary["gaussian_baseline"]["growth_rate"] = base.growth.value
        reports.append(("Gaussian", base_report))

    persist.write_json(_sibling(args.out, ".summary.json"), summary)
    if args.plot:
        _plot(args.plot, reports)
    for label, rep in reports:
        print(f"{label}: final wealth {rep.trajectory.wealth[-1]:.6f}, "
              f"q-wealth {rep.trajectory.q_wealth[-1]:.6f}, sharpe {rep.sharpe}, sortino {rep.sortino}")
    return 0


def _competitor(spec, d):
    if spec in (None, "uniform"):
        return Portfolio.uniform(d)
    if spec == "b_star":
        return None
    return persist.load_portfolio(spec).portfolio


def cmd_simulate(args):
    fit = persist.load_fit(args.model)
    saved = persist.load_portfolio(args.portfolio)
    competitor = _competitor(args.competitor, fit.model.d)
    run = SimulationRun(
        model=fit.model,
        b_star=saved.portfolio,
        competitor=saved.portfolio if competitor is None else competitor,
        horizon=args.days,
        paths=args.paths,
        seed=args.seed,
        workers=args.workers or 1,
    )
    if args.check == "lln":
        checkpoints = [n for n in (100, 1_000, 10_000) if n <= args.days] or [args.days]
        report = check_lln(run, checkpoints)
    elif args.check == "markov":
        report = check_markov_bound(run, args.lambdas)
    else:
        report = check_finite_n_bound(run, min(args.n0, args.days))
    header = ["check", "n", "statistic", "value", "bound"]
    if args.out:
        persist.write_rows_csv(args.out, header, report.csv_rows())
    else:
        print(",".join(header))
        for row in report.csv_rows():
            print(",".join(row))
    print(report.summary)
    return 0


def _metric(fn, r):
    try:
        return repr(float(fn(r, 0.0)))
    except ArithmeticError:
        return "undefined"


def cmd_metrics(args):
    traj = persist.read_trajectory_csv(args.report)
    r = daily_returns(traj)
    rows = [["sharpe", _metric(sharpe_ratio, r)], ["sortino", _metric(sortino_ratio, r)]]
    if args.out:
        persist.write_rows_csv(args.out, ["metric", "value"], rows)
    print("metric,value")
    for name, value in rows:
        print(f"{name},{value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qportfolio", description="q-Gaussian growth-optimal portfolios.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON config with fit/de/integrator sections")
        sp.add_argument("--seed", type=int, help="override every seed in the config")
        sp.add_argument("--workers", type=int, help="threads used to score DE generations")

    f = sub.add_parser("fit", help="fit a q-Gaussian to price relatives")
    f.add_argument("--input", required=True)
    f.add_argument("--tickers", help="comma-separated; default: all tickers in the file")
    f.add_argument("--from", dest="date_from")
    f.add_argument("--to", dest="date_to")
    f.add_argument("--out", required=True)
    common(f)
    f.set_defaults(func=cmd_fit)

    o = sub.add_parser("optimize", help="growth-optimal portfolio for a fitted model")
    o.add_argument("--model", required=True)
    o.add_argument("--method", choices=METHODS, help="integration method for the growth q-rate")
    o.add_argument("--out", required=True)
    common(o)
    o.set_defaults(func=cmd_optimize)

    b = sub.add_parser("backtest", help="apply a portfolio to realized prices")
    b.add_argument("--model", required=True)
    b.add_argument("--portfolio", required=True)
    b.add_argument("--input", required=True)
    b.add_argument("--from", dest="date_from")
    b.add_argument("--to", dest="date_to")
    b.add_argument("--out", required=True)
    b.add_argument("--plot", help="write an SVG chart of the wealth tracks")
    b.add_argument("--baseline", choices=["gaussian"], help="also run the q=1 baseline portfolio")
    common(b)
    b.set_defaults(func=cmd_backtest)

    s = sub.add_parser("simulate", help="Monte Carlo checks of the asymptotic claims")
    s.add_argument("--model", required=True)
    s.add_argument("--portfolio", required=True)
    s.add_argument("--competitor", default="uniform", help="'uniform', 'b_star' or a portfolio file")
    s.add_argument("--days", type=int, required=True)
    s.add_argument("--paths", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int)
    s.add_argument("--check", choices=["lln", "markov", "bound"], required=True)
    s.add_argument("--lambdas", type=float, nargs="+", default=[2.0, 5.0, 10.0])
    s.add_argument("--n0", type=int, default=100)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    m = sub.add_parser("metrics", help="Sharpe and Sortino ratios of a backtest report")
    m.add_argument("--report", required=True)
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        _emit_error("DataError", exc, EXIT_DATA)
        return EXIT_DATA
    except (OptimizationFailedError, UnsupportedError, DomainError, ArithmeticError) as exc:
        _emit_error(type(exc).__name__, exc, EXIT_NUMERICAL)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
