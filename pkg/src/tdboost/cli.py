"""Command-line front end.

    tdboost simulate --model model1 --n 1000 --seed 1 --out train.csv
    tdboost fit --data train.csv --response y --out model.json
    tdboost predict --model model.json --data test.csv --out pred.csv

Every command accepts ``--config FILE`` with ``key = value`` lines (option
names with dashes or underscores); command-line flags win. Exit codes: 0 ok,
2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .boost import BoostConfig, BoostedModel, cv_tune, fit
from .data import TRUE_F_COLUMN, ingest_csv, read_csv
from .errors import ConfigError, DataError, NumericError, TDBoostError
from .interpret import adjusted_importance, partial_dependence, variable_importance
from .io import atomic_write, table_text
from .kernels import BACKEND
from .metrics import gini_matrix, ordered_lorenz
from .profile import estimate_rho_phi, rho_grid
from .simulate import RfgSpec, draw_rfg_function, gen_model1, gen_model2, gen_rfg

log = logging.getLogger("tdboost")

DEFAULTS = {
    "response": "y",
    "weight": None,
    "categorical": "",
    "numeric": "",
    "rho": 1.5,
    "n_trees": 1000,
    "n_leaves": 3,
    "shrinkage": 0.005,
    "min_node": 10,
    "folds": 5,
    "seed": 0,
    "leaves": "2,3,4,5",
    "grid_n": 50,
    "grid_lo": 1.01,
    "grid_hi": 1.99,
    "retune": False,
    "tune_rho": 1.5,
    "repeats": 0,
    "aggregate": "mean",
    "grid_points": 100,
    "n": 1000,
    "phi": None,
    "p": 10,
    "n_terms": 20,
    "function_seed": 0,
    "model_out": None,
}


def _csv_list(text):
    return [s.strip() for s in str(text).split(",") if s.strip()]


def _int_list(text):
    try:
        return [int(s) for s in _csv_list(text)]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}")


class _Outputs:
    """Tracks files written by a command so they can be removed on failure."""

    def __init__(self):
        self.paths = []

    def write(self, path, text):
        atomic_write(path, text)
        self.paths.append(path)

    def cleanup(self):
        for path in self.paths:
            if os.path.exists(path):
                os.unlink(path)


def _add_data_opts(p):
    p.add_argument("--data", required=True, help="input CSV")
    p.add_argument("--response", help="response column (default y)")
    p.add_argument("--weight", help="weight/duration column (default all 1)")
    p.add_argument("--categorical", help="comma-separated columns to treat as categorical")
    p.add_argument("--numeric", help="comma-separated columns that must be numeric")


def _add_boost_opts(p):
    p.add_argument("--rho", type=float)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--n-leaves", type=int)
    p.add_argument("--shrinkage", type=float)
    p.add_argument("--min-node", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="tdboost", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--out", required=True, help="output path")
        return p

    p = command("fit", "fit a boosted Tweedie model")
    _add_data_opts(p)
    _add_boost_opts(p)
    p.add_argument("--phi", type=float, help="dispersion to record in the model")

    p = command("predict", "predict F and mu with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)

    p = command("tune", "cross-validate the number of trees and tree size")
    _add_data_opts(p)
    _add_boost_opts(p)
    p.add_argument("--leaves", help="comma-separated tree sizes (default 2,3,4,5)")

    p = command("profile", "profile-likelihood estimate of rho and phi")
    _add_data_opts(p)
    _add_boost_opts(p)
    p.add_argument("--leaves", help="tree sizes for cross validation")
    p.add_argument("--grid-n", type=int)
    p.add_argument("--grid-lo", type=float)
    p.add_argument("--grid-hi", type=float)
    p.add_argument("--tune-rho", type=float, help="rho used for the shared CV tuning")
    p.add_argument("--retune", action="store_const", const=True,
                   help="cross-validate at every grid point")
    p.add_argument("--no-tune", dest="no_tune", action="store_const", const=True,
                   help="use --n-trees/--n-leaves as given")
    p.add_argument("--model-out", help="also save the model at the selected rho")

    p = command("importance", "variable importance of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", help="training CSV (needed for --repeats)")
    p.add_argument("--response")
    p.add_argument("--weight")
    p.add_argument("--repeats", type=int, help="shadow-permutation repeats (0 = raw only)")
    p.add_argument("--aggregate", help="'mean' or a quantile for the baseline")
    p.add_argument("--seed", type=int)

    p = command("pdp", "partial dependence of a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="rows to average over (training data)")
    p.add_argument("--features", required=True, help="one or two comma-separated features")
    p.add_argument("--grid-points", type=int)

    p = command("lorenz", "ordered Lorenz curve / Gini matrix of premium columns")
    p.add_argument("--data", required=True)
    p.add_argument("--loss", required=True, help="loss column")
    p.add_argument("--base", help="base premium column")
    p.add_argument("--competing", help="competing premium column")
    p.add_argument("--scores", help="comma-separated premium columns for a Gini matrix")

    p = command("simulate", "generate a synthetic dataset")
    p.add_argument("--model", required=True, choices=["model1", "model2", "rfg"])
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--phi", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--p", type=int, help="RFG input dimension")
    p.add_argument("--n-terms", type=int, help="RFG number of bumps")
    p.add_argument("--function-seed", type=int, help="RFG target-function seed")
    return parser


def _read_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cp = configparser.ConfigParser()
    try:
        if not text.lstrip().startswith("["):
            text = "[tdboost]\n" + text
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        for key, value in cp[section].items():
            out[key.replace("-", "_")] = value
    return out


def resolve(parser, args):
    """Merge flags over the config file over the defaults, converting types."""
    file_values = _read_config(args.config) if args.config else {}
    sub = next(a for a in parser._subparsers._group_actions[0].choices.values()
               if a.prog.endswith(" " + args.command))
    types = {a.dest: a for a in sub._actions}
    known = set(types) | set(DEFAULTS)
    unknown = set(file_values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for dest, action in types.items():
        if dest in ("help", "config"):
            continue
        value = getattr(args, dest, None)
        if value is None and dest in file_values:
            raw = file_values[dest]
            try:
                if action.const is True:
                    value = raw.strip().lower() in ("1", "true", "yes", "on")
                elif action.type is not None:
                    value = action.type(raw)
                else:
                    value = raw
            except ValueError:
                raise ConfigError(f"config key {dest}: bad value {raw!r}") from None
        if value is None:
            value = DEFAULTS.get(dest)
        if value is None and action.required:
            raise ConfigError(f"--{dest.replace('_', '-')} is required")
        resolved[dest] = value
    resolved["command"] = args.command
    return resolved


def _boost_config(cfg):
    return BoostConfig(n_trees=cfg["n_trees"], n_leaves=cfg["n_leaves"],
                       shrinkage=cfg["shrinkage"], min_node=cfg["min_node"],
                       rho=cfg["rho"], n_folds=cfg["folds"], seed=cfg["seed"])


def _load_training(cfg):
    return ingest_csv(cfg["data"], cfg["response"], cfg["weight"],
                      categorical=_csv_list(cfg["categorical"]),
                      numeric=_csv_list(cfg["numeric"]))


def _provenance(cfg):
    return {"tdboost_version": __version__, "backend": BACKEND, "config": cfg}


def cmd_fit(cfg, out):
    data = _load_training(cfg)
    model = fit(data, _boost_config(cfg), phi=cfg["phi"])
    doc = model.to_dict()
    doc["provenance"] = _provenance(cfg)
    out.write(cfg["out"], json.dumps(doc, indent=1))
    out.write(cfg["out"] + ".loss.csv",
              table_text(["m", "loss"], [(m, float(v)) for m, v in enumerate(model.loss_trace)]))


def cmd_predict(cfg, out):
    model = BoostedModel.load(cfg["model"])
    data = ingest_csv(cfg["data"], None, schema=model.columns)
    F = model.predict(data.X)
    out.write(cfg["out"], table_text(["row", "F", "mu"],
                                     [(i, float(f), float(np.exp(f))) for i, f in enumerate(F)]))


def cmd_tune(cfg, out):
    data = _load_training(cfg)
    res = cv_tune(data, _boost_config(cfg), leaves=_int_list(cfg["leaves"]))
    rows = [(L, M, float(res.surface[a, M]))
            for a, L in enumerate(res.leaves) for M in range(res.surface.shape[1])]
    out.write(cfg["out"], table_text(["L", "M", "cv_loss"], rows))
    summary = {"best_trees": {str(k): v for k, v in res.best_trees.items()},
               "best_leaves": res.best_leaves, "best_n_trees": res.best_n_trees,
               "cv_loss": res.loss(res.best_leaves, res.best_n_trees)}
    out.write(cfg["out"] + ".json", json.dumps(summary, indent=1))
    print(json.dumps(summary))


def cmd_profile(cfg, out):
    data = _load_training(cfg)
    grid = rho_grid(cfg["grid_n"], cfg["grid_lo"], cfg["grid_hi"])
    res = estimate_rho_phi(data, _boost_config(cfg), grid=grid, retune=bool(cfg["retune"]),
                           leaves=_int_list(cfg["leaves"]), tune_rho=cfg["tune_rho"],
                           tune=not cfg.get("no_tune"), keep_model=bool(cfg["model_out"]))
    out.write(cfg["out"], table_text(["rho", "phi", "loglik"], res.table()))
    summary = {"rho": res.rho_star, "phi": res.phi_star_final,
               "n_trees": res.n_trees, "n_leaves": res.n_leaves}
    out.write(cfg["out"] + ".json", json.dumps(summary, indent=1))
    if cfg["model_out"]:
        doc = res.model.to_dict()
        doc["provenance"] = _provenance(cfg)
        out.write(cfg["model_out"], json.dumps(doc, indent=1))
    print(json.dumps(summary))


def cmd_importance(cfg, out):
    model = BoostedModel.load(cfg["model"])
    if cfg["repeats"]:
        if not cfg["data"]:
            raise ConfigError("--data is required with --repeats")
        data = ingest_csv(cfg["data"], cfg["response"] or "y", cfg["weight"],
                          schema=model.columns)
        bcfg = BoostConfig(n_trees=model.n_trees, n_leaves=model.n_leaves,
                           shrinkage=model.shrinkage, min_node=model.min_node,
                           rho=model.rho, seed=model.seed)
        agg = cfg["aggregate"]
        report = adjusted_importance(data, bcfg, n_repeats=cfg["repeats"], seed=cfg["seed"],
                                     aggregate=agg if agg == "mean" else float(agg),
                                     model=model)
    else:
        report = variable_importance(model)
    out.write(cfg["out"], table_text(report.header, report.rows()))


def cmd_pdp(cfg, out):
    model = BoostedModel.load(cfg["model"])
    data = ingest_csv(cfg["data"], None, schema=model.columns)
    res = partial_dependence(model, data, _csv_list(cfg["features"]),
                             n_points=cfg["grid_points"])
    out.write(cfg["out"], table_text(res.header, res.rows()))


def cmd_lorenz(cfg, out):
    header, rows = read_csv(cfg["data"])

    def column(name):
        if name not in header:
            raise DataError(f"column {name!r} not found")
        k = header.index(name)
        try:
            return np.array([float(r[k]) for r in rows])
        except ValueError as exc:
            raise DataError(f"column {name!r}: {exc}") from exc

    y = column(cfg["loss"])
    try:
        if cfg["scores"]:
            names = _csv_list(cfg["scores"])
            res = gini_matrix([column(c) for c in names], y, names)
            out.write(cfg["out"], table_text(["base", *names], res.rows()))
            print(json.dumps({"selected": res.selected_name,
                              "max_gini": dict(zip(names, (100 * res.max_gini).tolist()))}))
        else:
            if not (cfg["base"] and cfg["competing"]):
                raise ConfigError("give --base and --competing, or --scores")
            res = ordered_lorenz(column(cfg["base"]), column(cfg["competing"]), y)
            out.write(cfg["out"], table_text(["premium", "loss"], res.rows()))
            print(json.dumps({"gini": 100 * res.gini}))
    except ValueError as exc:
        if isinstance(exc, TDBoostError):
            raise
        raise DataError(str(exc)) from exc


def cmd_simulate(cfg, out):
    n, seed = cfg["n"], cfg["seed"]
    if cfg["model"] == "rfg":
        spec = RfgSpec(p=cfg["p"], n_terms=cfg["n_terms"],
                       phi=cfg["phi"] if cfg["phi"] is not None else 1.0,
                       rho=cfg["rho"], seed=cfg["function_seed"])
        data, F, _ = gen_rfg(n, spec, function=draw_rfg_function(spec),
                             rng=np.random.default_rng(seed))
    else:
        gen = gen_model1 if cfg["model"] == "model1" else gen_model2
        kw = {"rho": cfg["rho"]}
        if cfg["phi"] is not None:
            kw["phi"] = cfg["phi"]
        data, F = gen(n, seed, **kw)
    header = [*data.names, "y", TRUE_F_COLUMN]
    rows = [(*map(float, x), float(y), float(f)) for x, y, f in zip(data.X, data.y, F)]
    out.write(cfg["out"], table_text(header, rows))


COMMANDS = {
    "fit": cmd_fit, "predict": cmd_predict, "tune": cmd_tune, "profile": cmd_profile,
    "importance": cmd_importance, "pdp": cmd_pdp, "lorenz": cmd_lorenz,
    "simulate": cmd_simulate,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    out = _Outputs()
    try:
        cfg = resolve(parser, args)
        print(json.dumps({"resolved_config": cfg, "backend": BACKEND}), file=sys.stderr)
        with np.errstate(over="raise", invalid="raise"):
            COMMANDS[args.command](cfg, out)
        out.write(cfg["out"] + ".run.json", json.dumps(_provenance(cfg), indent=1))
    except TDBoostError as exc:
        out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FloatingPointError, ArithmeticError) as exc:
        out.cleanup()
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NumericError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
