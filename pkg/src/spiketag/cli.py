"""Operator command line: train, eval, predict, energy, gradcheck, inspect.

Every subcommand reads an optional --config key=value file, applies flag
overrides, echoes the effective configuration, and then runs. Exit codes:
0 success, 1 usage or configuration problem, 2 data problem, 3 numeric
failure.
"""

import argparse
import os
import sys

import numpy as np

from .data import batchify, load_corpus, load_embeddings, split_validation
from .energy import dnn_energy, profile_network
from .errors import (
    CheckpointError,
    ConfigError,
    NumericError,
    ParseError,
    SpiketagError,
)
from .layers import forward
from .metrics import decode_bio, format_report
from .neuron import CENTERINGS, SPIKE_MODES
from .persistence import checkpoint_from_training, load, restore_network, save
from .runconfig import RunConfig, apply_overrides, load_config_file
from .training import evaluate, grad_check, tiny_gradcheck_config, train

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

GRADCHECK_TOLERANCE = 1e-4


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spiketag",
        description="Spiking-network BIO aspect tagger: training, evaluation, "
        "prediction, energy profiling, gradient checks, spike inspection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--data", help="corpus path (token<TAB>label)")
        p.add_argument("--embeddings", help="embedding table path")
        p.add_argument("--ckpt", help="checkpoint path")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--spike-mode", dest="spike_mode", choices=SPIKE_MODES)
        p.add_argument("--time-steps", dest="time_steps", type=int)

    p_train = sub.add_parser("train", help="train and write the best checkpoint")
    add_common(p_train)
    p_eval = sub.add_parser("eval", help="score a checkpoint on a labeled corpus")
    add_common(p_eval)
    p_predict = sub.add_parser("predict", help="label raw sentences")
    add_common(p_predict)
    p_predict.add_argument("input", help="token-per-line sentences, blank-line separated")
    p_energy = sub.add_parser("energy", help="profile inference cost")
    add_common(p_energy)
    p_energy.add_argument(
        "--dnn-flops", dest="dnn_flops", type=float,
        help="print the dense-model energy for this FLOP count and exit",
    )
    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient validation")
    add_common(p_grad)
    p_inspect = sub.add_parser("inspect", help="per-token spike counts for one sentence")
    add_common(p_inspect)
    p_inspect.add_argument("sentence", help="whitespace-tokenized sentence")
    return parser


def effective_config(args):
    cfg = load_config_file(args.config) if args.config else RunConfig()
    overrides = {
        key: getattr(args, key, None)
        for key in ("data", "embeddings", "ckpt", "out", "seed", "lr",
                    "epochs", "spike_mode", "time_steps")
    }
    apply_overrides(cfg, overrides)
    print(cfg.echo())
    return cfg


def require_path(path, what):
    if not path:
        raise ConfigError(f"no {what} path configured")
    if not os.path.exists(path):
        raise ParseError(f"{what} path does not exist", path=path)
    return path


def load_dataset(cfg):
    corpus = load_corpus(require_path(cfg.data, "corpus"), mode=cfg.corpus_mode)
    table = load_embeddings(require_path(cfg.embeddings, "embeddings"))
    if cfg.embedding_dim and cfg.embedding_dim != table.dim:
        raise ConfigError(
            f"configured embedding_dim {cfg.embedding_dim} != table dim {table.dim}"
        )
    cfg.embedding_dim = table.dim
    return corpus, table


def cmd_train(args):
    cfg = effective_config(args)
    corpus, table = load_dataset(cfg)
    train_set, val_set = split_validation(corpus, cfg.val_size, cfg.seed)
    net_cfg = cfg.network_config()
    train_cfg = cfg.train_config()
    out_dir = cfg.out or "."
    os.makedirs(out_dir, exist_ok=True)
    log_path = os.path.join(out_dir, "train.log")
    with open(log_path, "w", encoding="utf-8") as log_fh:
        def log_fn(row):
            print(row)
            log_fh.write(row + "\n")

        result = train(train_set, val_set, table, net_cfg, train_cfg, log_fn=log_fn)
    ckpt_path = cfg.ckpt or os.path.join(out_dir, "model.ckpt")
    meta = {"epoch": result.best_epoch, "val_f1": result.best_f1, "seed": cfg.seed}
    save(
        checkpoint_from_training(result.best_params, net_cfg, train_cfg,
                                 result.opt_state, meta),
        ckpt_path,
    )
    print(f"checkpoint written to {ckpt_path} (best epoch {result.best_epoch}, "
          f"val_f1 {result.best_f1:.4f})")
    return EXIT_OK


def load_model(cfg):
    ckpt = load(require_path(cfg.ckpt, "checkpoint"))
    net, _ = restore_network(ckpt)
    return net, ckpt.net_cfg


def cmd_eval(args):
    cfg = effective_config(args)
    corpus, table = load_dataset(cfg)
    net, net_cfg = load_model(cfg)
    precision, recall, f1, tp, fp, fn = evaluate(corpus, table, net, net_cfg,
                                                 cfg.batch_size)
    print(format_report(precision, recall, f1, tp, fp, fn))
    return EXIT_OK


def read_sentences(path):
    sentences = []
    current = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            tok = line.strip()
            if not tok:
                if current:
                    sentences.append(current)
                    current = []
                continue
            current.append(tok)
    if current:
        sentences.append(current)
    return sentences


def cmd_predict(args):
    cfg = effective_config(args)
    table = load_embeddings(require_path(cfg.embeddings, "embeddings"))
    cfg.embedding_dim = table.dim
    net, net_cfg = load_model(cfg)
    sentences = read_sentences(require_path(args.input, "input"))
    from .data import Example

    examples = [Example(tokens=toks, labels=["O"] * len(toks)) for toks in sentences]
    batches = batchify(examples, table, cfg.batch_size, rng=None)
    outputs = []
    for batch in batches:
        prob, _ = forward(batch.embeddings, net, net_cfg, mask=batch.mask)
        outputs.extend(decode_bio(prob, batch.mask))
    for toks, labels in zip(sentences, outputs):
        for tok, lab in zip(toks, labels):
            print(f"{tok}\t{lab}")
        print()
    return EXIT_OK


def cmd_energy(args):
    cfg = effective_config(args)
    if args.dnn_flops is not None:
        print(f"{dnn_energy(args.dnn_flops) * 1e3:.4f} mJ")
        return EXIT_OK
    corpus, table = load_dataset(cfg)
    net, net_cfg = load_model(cfg)
    # gamma sample: the validation split when one fits, else the whole corpus
    n_val = cfg.val_size if cfg.val_size < len(corpus) else 0
    _, val_set = split_validation(corpus, n_val, cfg.seed)
    sample = val_set if val_set else corpus
    batch = batchify(sample, table, max(len(sample), 1), rng=None)[0]
    report = profile_network(net, batch, net_cfg)
    print(report.rows())
    import json

    print(json.dumps(report.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args):
    cfg = effective_config(args)
    worst = 0.0
    for mode in SPIKE_MODES:
        for centering in CENTERINGS:
            err = grad_check(tiny_gradcheck_config(mode, centering), seed=cfg.seed)
            print(f"gradcheck\t{mode}\t{centering}\t{err:.3e}")
            worst = max(worst, err)
    if worst >= GRADCHECK_TOLERANCE:
        print(f"FAIL max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE:.0e}",
              file=sys.stderr)
        return EXIT_NUMERIC
    print(f"OK max relative error {worst:.3e}")
    return EXIT_OK


def cmd_inspect(args):
    cfg = effective_config(args)
    table = load_embeddings(require_path(cfg.embeddings, "embeddings"))
    cfg.embedding_dim = table.dim
    net, net_cfg = load_model(cfg)
    tokens = args.sentence.split()
    if not tokens:
        raise ConfigError("inspect needs a non-empty sentence")
    emb = np.stack([table.lookup(t) for t in tokens]).astype(np.float32)[None, :, :]
    mask = np.ones((1, len(tokens)), dtype=np.float32)
    _, trace = forward(emb, net, net_cfg, mask=mask)
    final = trace.spk[-1]  # last spiking layer, per timestep
    pos = sum((spk > 0).sum(axis=2)[0] for spk in final)
    neg = sum((spk < 0).sum(axis=2)[0] for spk in final)
    print("token\tpos_spikes\tneg_spikes")
    for i, tok in enumerate(tokens):
        print(f"{tok}\t{int(pos[i])}\t{int(neg[i])}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "energy": cmd_energy,
    "gradcheck": cmd_gradcheck,
    "inspect": cmd_inspect,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, CheckpointError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SpiketagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
