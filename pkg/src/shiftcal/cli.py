"""Command-line surface for the calibration toolkit.

Exit codes: 0 on success, 1 on validation errors (bad flags or malformed
inputs), 2 on I/O errors (missing or unreadable files). Output files are
written atomically, never partially.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from shiftcal import experiment as exp
from shiftcal import fileio
from shiftcal.core import (
    PredictionSet,
    TemperatureModel,
    correctness,
    model_probs,
)
from shiftcal.importance import cpcs_fit, estimate_weights, transcal_lite_fit
from shiftcal.metrics import accuracy, bin_equal_mass, brier, ece, nll
from shiftcal.scaling import fit_temperature
from shiftcal.surrogate import (
    DEFAULT_SUBSAMPLE,
    DISTANCES,
    build_ladder,
    select_by_distribution,
    select_by_mean,
    sts_fit,
    subsample_pmax,
)
from shiftcal.synth import SynthSpec, generate
from shiftcal.core import SacLadderModel, pmax_values


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract is 1 for validation errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(_fail(message))


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _cmd_fit_ts(args) -> int:
    cal = fileio.read_predictions(args.cal)
    fit = fit_temperature(cal, "nll")
    fileio.write_model(args.out, TemperatureModel(temperature=fit.temperature, objective="nll"))
    return 0


def _importance_weights(args):
    cal_feats = fileio.read_features(args.cal_feats)
    source = fileio.read_features(args.source_feats)
    target = fileio.read_features(args.target_feats)
    return estimate_weights(source, target, cal_feats)


def _cmd_fit_cpcs(args) -> int:
    cal = fileio.read_predictions(args.cal)
    fit = cpcs_fit(cal, _importance_weights(args))
    fileio.write_model(args.out, TemperatureModel(temperature=fit.temperature, objective="cpcs"))
    return 0


def _cmd_fit_wece(args) -> int:
    cal = fileio.read_predictions(args.cal)
    fit = transcal_lite_fit(cal, _importance_weights(args))
    fileio.write_model(
        args.out, TemperatureModel(temperature=fit.temperature, objective="transcal_lite")
    )
    return 0


def _parse_tagged(pairs) -> list[tuple[str, PredictionSet]]:
    tagged = []
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"--set expects tag=path, got {pair!r}")
        tag, path = pair.split("=", 1)
        tagged.append((tag, fileio.read_predictions(path)))
    return tagged


def _cmd_build_ladder(args) -> int:
    ladder = build_ladder(_parse_tagged(args.set))
    fileio.write_model(args.out, ladder.summaries())
    return 0


def _cmd_sac(args) -> int:
    model = fileio.read_model(args.ladder)
    if not isinstance(model, SacLadderModel):
        raise ValueError("--ladder file must contain a sac_ladder model")
    test = fileio.read_predictions(args.test)
    test_pmax = subsample_pmax(pmax_values(test), args.subsample, args.seed)
    if args.distance == "mean":
        selected = select_by_mean([e.mean_pmax for e in model.entries], float(np.mean(test_pmax)))
    else:
        if args.ladder_preds is None:
            raise ValueError(f"--ladder-preds is required for distance {args.distance!r}")
        samples = []
        for entry in model.entries:
            path = Path(args.ladder_preds) / f"{entry.tag}.csv"
            samples.append(pmax_values(fileio.read_predictions(path)))
        selected = select_by_distribution(samples, test_pmax, args.distance)
    fileio.write_model(args.out, SacLadderModel(entries=model.entries, selected=selected))
    return 0


def _cmd_sts(args) -> int:
    paths = sorted(Path(args.ladder_preds).glob("*.csv"))
    if not paths:
        raise ValueError(f"no .csv prediction files found in {args.ladder_preds}")
    tagged = [(p.stem, fileio.read_predictions(p)) for p in paths]
    ladder = build_ladder(tagged)
    fileio.write_model(args.out, sts_fit(ladder))
    return 0


def _cmd_eval(args) -> int:
    test = fileio.read_predictions(args.test)
    model = fileio.read_model(args.model)
    probs = model_probs(model, test)
    pmax = probs.max(axis=1)
    correct = correctness(test)
    binned = bin_equal_mass(pmax, correct, args.bins)
    labels = test.require_labels()
    print(f"ece={ece(binned):.6f}")
    print(f"nll={nll(probs, labels):.6f}")
    print(f"brier={brier(probs, labels):.6f}")
    print(f"accuracy={accuracy(correct):.6f}")
    return 0


def _cmd_reliability(args) -> int:
    test = fileio.read_predictions(args.test)
    model = fileio.read_model(args.model)
    probs = model_probs(model, test)
    binned = bin_equal_mass(probs.max(axis=1), correctness(test), args.bins)
    fileio.write_reliability(args.out, binned)
    return 0


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        num_classes=args.classes,
        dim=args.dim,
        n=args.n,
        seed=args.seed,
        shift_std=args.shift,
        temperature_distortion=args.distort,
    )
    preds, true_conf = generate(spec)
    fileio.write_predictions(args.out, preds)
    if args.truth is not None:
        lines = ["true_confidence"] + [repr(float(v)) for v in true_conf]
        fileio._atomic_write_text(args.truth, "\n".join(lines) + "\n")
    return 0


def _cmd_experiment(args) -> int:
    rows = exp.run_experiment(args.seed)
    fileio._atomic_write_text(args.out, exp.report_csv(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shiftcal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-ts", help="fit a temperature by NLL on a labeled calibration file")
    p.add_argument("--cal", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit_ts)

    for name, func, help_text in (
        ("fit-cpcs", _cmd_fit_cpcs, "importance-weighted Brier temperature fit"),
        ("fit-wece", _cmd_fit_wece, "importance-weighted ECE temperature fit (transcal-lite)"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--cal", required=True)
        p.add_argument("--cal-feats", required=True)
        p.add_argument("--source-feats", required=True)
        p.add_argument("--target-feats", required=True)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("build-ladder", help="fit per-set temperatures and mean confidences")
    p.add_argument("--set", action="append", required=True, metavar="TAG=PATH")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_ladder)

    p = sub.add_parser("sac", help="select the ladder entry closest to the test set")
    p.add_argument("--ladder", required=True)
    p.add_argument("--ladder-preds", default=None, help="directory of TAG.csv files (ks/w1 only)")
    p.add_argument("--test", required=True)
    p.add_argument("--distance", choices=DISTANCES, default="mean")
    p.add_argument("--subsample", nargs="?", const=DEFAULT_SUBSAMPLE, type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sac)

    p = sub.add_parser("sts", help="fit one temperature on the union of all ladder sets")
    p.add_argument("--ladder-preds", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sts)

    p = sub.add_parser("eval", help="print ece/nll/brier/accuracy for a model on a labeled set")
    p.add_argument("--test", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--bins", type=int, default=15)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("reliability", help="export per-bin reliability data as CSV")
    p.add_argument("--test", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("synth", help="generate a synthetic covariate-shift prediction file")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--shift", type=float, default=0.0)
    p.add_argument("--distort", type=float, default=1.0)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("experiment", help="run the synthetic five-intensity benchmark")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValueError as exc:
        return _fail(str(exc))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
