"""Command-line front end.

Subcommands: accountant, train, certify, curve, attack-check, pipeline.
Exit codes: 0 success, 1 usage error, 2 runtime error. Runtime failures are
tagged with the pipeline stage that raised them.
"""

import argparse
import os
import sys

import numpy as np

from .accountant import (DEFAULT_ORDERS, GroupRadius, PrivacyParams,
                         group_rdp_curve, rdp_to_adp, subset_adjusted_steps,
                         subset_effective_ratio)
from .attack import NeighborSpec, empirical_flip_check
from .certify import (Method, certified_accuracy_curve, certify_dataset,
                      summary_stats)
from .config import RunConfig, load_config, serialize_config, with_overrides
from . import fileio
from .training import (DEFAULT_HIDDEN, DEFAULT_LR, DEFAULT_OPTIMIZER,
                       train_ensemble, infer_dataset)


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _staged(stage, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(stage, str(exc)) from exc


def _load_config_arg(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return _staged("config", load_config, path)


def _parse_orders(raw):
    if raw is None:
        return None
    return tuple(float(tok) for tok in raw.split(",") if tok.strip())


# -- subcommands --------------------------------------------------------------

def cmd_accountant(args) -> int:
    params = PrivacyParams(args.q, args.sigma, args.steps, args.clip)
    orders = _parse_orders(args.orders) or DEFAULT_ORDERS
    curve = group_rdp_curve(params, GroupRadius(args.radius), orders)
    print("alpha,epsilon")
    for a, e in zip(curve.orders, curve.epsilons):
        print(f"{float(a)!r},{float(e)!r}")
    eps, delta = rdp_to_adp(curve, args.delta)
    print(f"adp,{float(eps)!r},{float(delta)!r}")
    return 0


def cmd_train(args) -> int:
    config = _load_config_arg(args.config)
    config = with_overrides(config, instances=args.instances,
                            subset_size=args.subset_size, seed=args.seed)
    data = _staged("input", fileio.read_dataset, args.data)
    ensemble = _staged(
        "train", train_ensemble, data, config.privacy_params(),
        instances=config.instances, subset_size=config.subset_size,
        seed=config.seed, architecture=args.arch, hidden=args.hidden,
        lr=args.lr, optimizer=args.optimizer)
    _staged("output", fileio.save_ensemble, args.out, ensemble)
    if config.subset_size is not None:
        steps = subset_adjusted_steps(config.steps, config.subset_size, data.n)
        q_eff = subset_effective_ratio(config.q, config.subset_size, data.n)
        print(f"trained {len(ensemble)} instances on subsets of {config.subset_size}; "
              f"account against the full dataset with q={q_eff!r}, steps={steps}")
    else:
        print(f"trained {len(ensemble)} instances")
    return 0


def _effective_privacy_params(config: RunConfig, train_size) -> PrivacyParams:
    """Accounting parameters, with the ratio rescaled when instances were
    trained on sub-datasets."""
    params = config.privacy_params()
    if config.subset_size is not None:
        if train_size is None:
            raise StageError("certify", "subset_size set but training size unknown")
        q_eff = subset_effective_ratio(params.q, config.subset_size, train_size)
        steps = subset_adjusted_steps(params.steps, config.subset_size, train_size)
        params = PrivacyParams(q_eff, params.sigma, steps, params.clip)
    return params


def cmd_certify(args) -> int:
    config = _load_config_arg(args.config)
    config = with_overrides(
        config, eta=args.eta, r_max=args.r_max,
        method=Method(args.method) if args.method else None)
    if args.votes:
        table = _staged("input", fileio.read_votes, args.votes)
    else:
        table = _staged("input", fileio.read_scores, args.scores)
    if config.r_max is None:
        raise StageError("certify", "r_max is unset; pass --r-max or set it "
                                    "in the config (it defaults to the "
                                    "training-set size in the pipeline)")
    params = _effective_privacy_params(config, args.train_size)
    certs = _staged("certify", certify_dataset, table, params, config.method,
                    config.eta, config.delta, config.r_max,
                    orders=config.orders, score_bound=args.score_bound)
    _staged("output", fileio.write_certificates, args.out, certs)
    stats = summary_stats(certs)
    if stats is None:
        print(f"wrote {len(certs)} certificates (all abstain)")
    else:
        print(f"wrote {len(certs)} certificates; median radius {stats[0]}, "
              f"max {stats[1]} over non-abstaining samples")
    return 0


def cmd_curve(args) -> int:
    certs = _staged("input", fileio.read_certificates, args.certs)
    truth = _staged("input", fileio.read_truth, args.truth)
    curve = _staged("curve", certified_accuracy_curve, certs, truth)
    _staged("output", fileio.write_curve, args.out, curve)
    print(f"certified accuracy at radius 0: {curve.accuracy[0]!r}")
    return 0


def cmd_attack_check(args) -> int:
    config = _load_config_arg(args.config)
    data = _staged("input", fileio.read_dataset, args.data)
    pool = None
    if args.pool:
        pool = _staged("input", fileio.read_dataset, args.pool, data.n_classes)
    ops = tuple(tok.strip() for tok in args.ops.split(",") if tok.strip())
    spec = NeighborSpec(args.radius, ops, pool)
    x = np.asarray([float(tok) for tok in args.sample.split(",")])
    report = _staged(
        "attack-check", empirical_flip_check, data, spec,
        config.privacy_params(), x, args.trials, seed=config.seed,
        sample_id=args.sample_id, certified_radius=args.certified_radius,
        inference=args.inference, architecture=args.arch, hidden=args.hidden,
        lr=args.lr, optimizer=args.optimizer)
    _staged("output", fileio.write_flip_report, args.out, report)
    print(f"flips: {report.flip_count}/{report.neighbor_count} neighbors "
          f"({report.trials} retrainings each)")
    return 0


def run_pipeline(config: RunConfig, data_path, test_path, out_dir,
                 architecture="logistic", hidden=DEFAULT_HIDDEN,
                 lr=DEFAULT_LR, optimizer=DEFAULT_OPTIMIZER,
                 score_bound="hoeffding") -> dict:
    """train -> infer -> bound -> certify -> curve, persisting every
    intermediate. Deterministic for a fixed config and seed."""
    os.makedirs(out_dir, exist_ok=True)
    data = _staged("input", fileio.read_dataset, data_path)
    if not os.path.exists(test_path):
        raise StageError("input", f"test file {test_path!r} does not exist")
    test = _staged("input", fileio.read_dataset, test_path, data.n_classes)

    ensemble = _staged("train", train_ensemble, data, config.privacy_params(),
                       instances=config.instances,
                       subset_size=config.subset_size, seed=config.seed,
                       architecture=architecture, hidden=hidden, lr=lr,
                       optimizer=optimizer)
    ensemble_dir = os.path.join(out_dir, "ensemble")
    _staged("train", fileio.save_ensemble, ensemble_dir, ensemble)

    votes, scores = _staged("infer", infer_dataset, ensemble, test.features)
    votes_path = os.path.join(out_dir, "votes.csv")
    scores_path = os.path.join(out_dir, "scores.csv")
    _staged("infer", fileio.write_votes, votes_path, votes)
    _staged("infer", fileio.write_scores, scores_path, scores)

    params = _effective_privacy_params(config, data.n)
    r_max = config.r_max if config.r_max is not None else data.n
    table = scores if config.method.uses_scores else votes
    certs = _staged("certify", certify_dataset, table, params, config.method,
                    config.eta, config.delta, r_max, orders=config.orders,
                    score_bound=score_bound)
    certs_path = os.path.join(out_dir, "certificates.csv")
    _staged("certify", fileio.write_certificates, certs_path, certs)

    truth_path = os.path.join(out_dir, "truth.csv")
    _staged("curve", fileio.write_truth, truth_path, votes.sample_ids,
            test.labels)
    truth = {sid: int(lab) for sid, lab in zip(votes.sample_ids, test.labels)}
    curve = _staged("curve", certified_accuracy_curve, certs, truth)
    curve_path = os.path.join(out_dir, "curve.csv")
    _staged("curve", fileio.write_curve, curve_path, curve)

    manifest_path = os.path.join(out_dir, "manifest.txt")
    _staged("manifest", fileio.write_run_manifest, manifest_path,
            serialize_config(config),
            {"data": data_path, "test": test_path},
            {"votes": votes_path, "scores": scores_path,
             "certificates": certs_path, "curve": curve_path})
    return {"ensemble": ensemble_dir, "votes": votes_path,
            "scores": scores_path, "certificates": certs_path,
            "curve": curve_path, "truth": truth_path,
            "manifest": manifest_path, "stats": summary_stats(certs, truth)}


def cmd_pipeline(args) -> int:
    config = _load_config_arg(args.config)
    outputs = run_pipeline(config, args.data, args.test, args.out,
                           architecture=args.arch, hidden=args.hidden,
                           lr=args.lr, optimizer=args.optimizer,
                           score_bound=args.score_bound)
    stats = outputs.pop("stats")
    for name, path in outputs.items():
        print(f"{name}: {path}")
    if stats is not None:
        print(f"median radius {stats[0]}, max {stats[1]} over correct samples")
    return 0


# -- wiring -------------------------------------------------------------------

def _add_trainer_flags(sub):
    sub.add_argument("--arch", choices=("logistic", "mlp"), default="logistic")
    sub.add_argument("--hidden", type=int, default=DEFAULT_HIDDEN)
    sub.add_argument("--lr", type=float, default=DEFAULT_LR)
    sub.add_argument("--optimizer", choices=("sgd", "adam"),
                     default=DEFAULT_OPTIMIZER)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpcert",
                     description="Certified poisoning robustness for "
                                 "differentially private ensembles")
    sub = parser.add_subparsers(dest="command", required=True)

    acc = sub.add_parser("accountant", parents=[], help="print the group RDP curve")
    acc.add_argument("--q", type=float, required=True)
    acc.add_argument("--sigma", type=float, required=True)
    acc.add_argument("--steps", type=int, required=True)
    acc.add_argument("--radius", type=int, default=1)
    acc.add_argument("--orders", default=None,
                     help="comma-separated Renyi orders (default grid)")
    acc.add_argument("--delta", type=float, default=1e-5)
    acc.add_argument("--clip", type=float, default=1.0)
    acc.set_defaults(fn=cmd_accountant)

    train = sub.add_parser("train", help="train a noisy ensemble")
    train.add_argument("--data", required=True)
    train.add_argument("--config", default=None)
    train.add_argument("--instances", type=int, default=None)
    train.add_argument("--subset-size", type=int, default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out", required=True)
    _add_trainer_flags(train)
    train.set_defaults(fn=cmd_train)

    cert = sub.add_parser("certify", help="certify a vote or score table")
    src = cert.add_mutually_exclusive_group(required=True)
    src.add_argument("--votes")
    src.add_argument("--scores")
    cert.add_argument("--config", default=None)
    cert.add_argument("--method", choices=[m.value for m in Method], default=None)
    cert.add_argument("--eta", type=float, default=None)
    cert.add_argument("--r-max", type=int, default=None)
    cert.add_argument("--train-size", type=int, default=None,
                      help="full training-set size (needed with subset_size)")
    cert.add_argument("--score-bound", choices=("hoeffding", "bernstein"),
                      default="hoeffding")
    cert.add_argument("--out", required=True)
    cert.set_defaults(fn=cmd_certify)

    curve = sub.add_parser("curve", help="certified accuracy curve")
    curve.add_argument("--certs", required=True)
    curve.add_argument("--truth", required=True)
    curve.add_argument("--out", required=True)
    curve.set_defaults(fn=cmd_curve)

    atk = sub.add_parser("attack-check", help="brute-force flip check")
    atk.add_argument("--data", required=True)
    atk.add_argument("--pool", default=None)
    atk.add_argument("--radius", type=int, required=True)
    atk.add_argument("--ops", default="delete",
                     help="comma-separated subset of insert,delete,modify")
    atk.add_argument("--config", default=None)
    atk.add_argument("--sample", required=True,
                     help="comma-separated feature vector of the test point")
    atk.add_argument("--sample-id", default="0")
    atk.add_argument("--trials", type=int, required=True)
    atk.add_argument("--certified-radius", type=int, default=None)
    atk.add_argument("--inference", choices=("multinomial", "scores"),
                     default="multinomial")
    atk.add_argument("--out", required=True)
    _add_trainer_flags(atk)
    atk.set_defaults(fn=cmd_attack_check)

    pipe = sub.add_parser("pipeline", help="train, infer, certify and plot in one run")
    pipe.add_argument("--data", required=True)
    pipe.add_argument("--test", required=True)
    pipe.add_argument("--config", default=None)
    pipe.add_argument("--out", required=True)
    pipe.add_argument("--score-bound", choices=("hoeffding", "bernstein"),
                      default="hoeffding")
    _add_trainer_flags(pipe)
    pipe.set_defaults(fn=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except StageError as exc:
        print(f"dpcert: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"dpcert: [runtime] {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
