"""Command-line entry point: ``cne <subcommand> [--config FILE] [--key value ...]``."""
import argparse
import hashlib
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .encoders import EncoderSpec
from .evaluator import DEFAULT_KS, embed_all, evaluate_lp, write_rank_dump, write_report
from .graph import (DEFAULT_EDGE_TYPE, DEFAULT_NODE_TYPE, Graph, hold_out_nodes, load_edge_list,
                    load_node_attributes, load_node_types, split_edges, unseen_test_nodes)
from .sampler import dump_walks, walk_batch
from .synthetic import planted_blocks, write_fixture
from .text import Vocabulary, build_vocabulary, encode_nodes
from .trainer import NodeInputs, TrainConfig, train, write_loss_log

log = logging.getLogger("cne")

SUBCOMMANDS = ("build-vocab", "walk", "train", "embed", "eval", "synth")


class ConfigError(ValueError):
    pass


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_list(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


def _weights(s):
    out = {}
    for item in filter(None, (x.strip() for x in s.split(","))):
        k, _, v = item.partition(":")
        out[k.strip()] = float(v)
    return out


def _str_map(s):
    out = {}
    for item in filter(None, (x.strip() for x in s.split(","))):
        k, sep, v = item.partition(":")
        if not sep:
            raise ValueError(f"expected type:kind, got {item!r}")
        out[k.strip()] = v.strip()
    return out


# key -> (parser, default); defaults for training follow the reference setup
SETTINGS = {
    "walk_length": (int, 20),
    "window": (int, 2),
    "negatives": (int, 4),
    "walks_per_node": (int, 10),
    "margin": (float, 1.0),
    "token_dim": (int, 256),
    "hidden_dim": (int, 512),
    "lr": (float, 8e-4),
    "batch": (int, 256),
    "epochs": (int, 1),
    "seed": (int, 0),
    "share_phi": (_bool, False),
    "edge_type_weights": (_weights, {}),
    "encoder": (str, "gru"),
    "multi_n": (int, 4),
    "multi_shared": (_bool, True),
    "dtype": (str, "float32"),
    "node_encoders": (_str_map, {}),
    "directed": (_bool, False),
    "max_vocab": (int, 40000),
    "max_len": (int, 64),
    "holdout": (float, 0.2),
    "holdout_nodes": (int, 0),
    "split_seed": (int, None),
    "sample_nodes": (int, 1000),
    "ks": (_int_list, DEFAULT_KS),
    "eval_mode": (str, "asym"),
    "eval_edge_type": (str, None),
    "unseen_only": (_bool, False),
    "walk_edge_type": (str, DEFAULT_EDGE_TYPE),
    "workers": (int, 1),
    "synth_nodes": (int, 200),
    "synth_seed": (int, 0),
}
INPUT_PATHS = ("edges", "attributes", "node_types")
OUTPUT_PATHS = ("loss_log", "report", "rank_dump", "embeddings", "walks_out")
# vocab and checkpoint are outputs for some subcommands and inputs for others
PATHS = INPUT_PATHS + OUTPUT_PATHS + ("vocab", "checkpoint")

# per subcommand: required inputs/outputs, then optional ones it reads/writes
REQUIRED = {
    "build-vocab": {"in": ("attributes",), "out": ("vocab",)},
    "walk": {"in": ("edges",), "out": ("walks_out",), "opt_in": ("node_types",)},
    "train": {"in": ("edges", "attributes"), "out": ("vocab", "checkpoint"),
              "opt_in": ("node_types",), "opt_out": ("loss_log",)},
    "embed": {"in": ("attributes", "vocab", "checkpoint"), "out": ("embeddings",),
              "opt_in": ("edges", "node_types")},
    "eval": {"in": ("edges", "attributes", "vocab", "checkpoint"), "out": ("report",),
             "opt_in": ("node_types",), "opt_out": ("rank_dump",)},
    "synth": {"in": (), "out": ("edges", "attributes")},
}


@dataclass
class RunConfig:
    subcommand: str
    values: dict
    paths: dict = field(default_factory=dict)

    def __getattr__(self, key):
        values = self.__dict__.get("values", {})
        if key in values:
            return values[key]
        paths = self.__dict__.get("paths", {})
        if key in PATHS:
            return paths.get(key)
        raise AttributeError(key)

    def train_config(self):
        return TrainConfig(**{k: self.values[k] for k in TrainConfig.field_names()})

    def config_hash(self):
        """Hash of every setting that can change results (not paths, not workers)."""
        text = "\n".join(f"{k}={self.values[k]!r}" for k in sorted(self.values) if k != "workers")
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def header(self):
        return f"cne {self.subcommand} config_hash={self.config_hash()} seed={self.values['seed']}"


def read_config_file(path):
    """Flat ``key=value`` lines; '#' comments and blank lines ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise ConfigError(f"{path}: line {lineno}: expected key=value")
            if key not in SETTINGS and key not in PATHS:
                raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
            out[key] = (value.strip(), f"{path}: line {lineno}")
    return out


def parse_config(subcommand, config_path=None, overrides=None, env=None):
    """Resolve defaults < CNE_SEED < config file < flag overrides."""
    env = os.environ if env is None else env
    raw = {}
    if "CNE_SEED" in env:
        raw["seed"] = (env["CNE_SEED"], "environment variable CNE_SEED")
    if config_path:
        raw.update(read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in SETTINGS and key not in PATHS:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = (value, f"flag --{key.replace('_', '-')}")

    values = {k: default for k, (_, default) in SETTINGS.items()}
    paths = {}
    for key, (text, where) in raw.items():
        if key in PATHS:
            paths[key] = text
            continue
        try:
            values[key] = SETTINGS[key][0](text)
        except ValueError as exc:
            raise ConfigError(f"{where}: cannot parse {key}={text!r}: {exc}") from None
    if values["split_seed"] is None:
        values["split_seed"] = values["seed"]
    cfg = RunConfig(subcommand, values, paths)
    try:
        cfg.train_config()
        if values["encoder"] not in ("sum", "mean", "gru", "multi_gru_sum"):
            raise ValueError(f"unknown encoder {values['encoder']!r}")
        if values["eval_mode"] not in ("asym", "sym"):
            raise ValueError("eval_mode must be asym or sym")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _check_paths(cfg)
    return cfg


def _check_paths(cfg):
    need = REQUIRED[cfg.subcommand]
    for key in need["in"] + need["out"]:
        if not cfg.paths.get(key):
            raise ConfigError(f"missing required path {key!r} for {cfg.subcommand}")
    present = lambda keys: [k for k in keys if cfg.paths.get(k)]
    inputs = list(need["in"]) + present(need.get("opt_in", ()))
    if cfg.subcommand == "train":
        inputs += present(("vocab",)) if os.path.exists(cfg.paths["vocab"]) else []
    for key in inputs:
        if not os.path.isfile(cfg.paths[key]):
            raise ConfigError(f"{key} path does not exist: {cfg.paths[key]}")
    for key in list(need["out"]) + present(need.get("opt_out", ())):
        parent = os.path.dirname(os.path.abspath(cfg.paths[key]))
        if not os.path.isdir(parent):
            raise ConfigError(f"directory for {key} does not exist: {parent}")


# data loading shared by subcommands

def _load_graph(cfg):
    types = load_node_types(cfg.node_types) if cfg.node_types else None
    return load_edge_list(cfg.edges, cfg.directed, DEFAULT_EDGE_TYPE, types)


def _specs(cfg, graph_types):
    tc = cfg.train_config()
    kinds = dict(cfg.node_encoders)
    return {nt: tc.encoder_spec(kinds.get(nt, cfg.encoder)) for nt in sorted(set(graph_types) | set(kinds))}


def _arity(specs):
    return {nt: s.arity for nt, s in specs.items()}


def _split(cfg, g):
    if cfg.holdout_nodes > 0:
        rng = np.random.default_rng(cfg.split_seed)
        held = rng.choice(g.num_nodes, size=min(cfg.holdout_nodes, g.num_nodes), replace=False)
        return hold_out_nodes(g, held)
    return split_edges(g, cfg.holdout, cfg.split_seed)


def _inputs(cfg, g, texts, vocab, specs):
    seqs = encode_nodes(g, texts, vocab, _arity(specs), cfg.max_len)
    return NodeInputs.from_graph(g, seqs)


def cmd_build_vocab(cfg):
    texts = load_node_attributes(cfg.attributes)
    vocab = build_vocabulary(texts, cfg.max_vocab)
    vocab.save(cfg.vocab, cfg.header())
    log.info("vocabulary of %d tokens written to %s", len(vocab), cfg.vocab)


def cmd_walk(cfg):
    g = _load_graph(cfg)
    starts = np.tile(np.arange(g.num_nodes, dtype=np.int64), cfg.walks_per_node)
    walks, lengths = walk_batch(g, starts, cfg.walk_length, cfg.walk_edge_type, cfg.seed)
    with open(cfg.walks_out, "w", encoding="utf-8") as fh:
        fh.write(f"# {cfg.header()}\n")
        dump_walks(g, walks, lengths, fh)


def cmd_train(cfg):
    g = _load_graph(cfg)
    texts = load_node_attributes(cfg.attributes)
    if os.path.exists(cfg.vocab):
        vocab = Vocabulary.load(cfg.vocab)
    else:
        vocab = build_vocabulary(texts, cfg.max_vocab)
        vocab.save(cfg.vocab, cfg.header())
    specs = _specs(cfg, g.node_type)
    train_g, test = _split(cfg, g)
    inputs = _inputs(cfg, train_g, texts, vocab, specs)
    rows = []
    state = train(cfg.train_config(), train_g, inputs, specs, loss_log=rows, vocab_size=len(vocab))
    save_checkpoint(state, cfg.checkpoint, cfg.header())
    if cfg.loss_log:
        write_loss_log(rows, cfg.loss_log, cfg.header())
    log.info("trained on %d edges (%d held out), %d Adam steps", train_g.num_edges, len(test), state.step)


def _all_labels(g, texts):
    labels = list(g.labels) if g is not None else []
    known = set(labels)
    labels += [lab for lab in texts if lab not in known]
    return labels


def cmd_embed(cfg):
    texts = load_node_attributes(cfg.attributes)
    vocab = Vocabulary.load(cfg.vocab)
    state = load_checkpoint(cfg.checkpoint)
    g = _load_graph(cfg) if cfg.edges else None
    labels = _all_labels(g, texts)
    types = load_node_types(cfg.node_types) if cfg.node_types else {}
    full = Graph(labels, [], False, [types.get(lab, DEFAULT_NODE_TYPE) for lab in labels])
    inputs = NodeInputs.from_graph(full, encode_nodes(full, texts, vocab, _arity(state.specs), cfg.max_len))
    et = cfg.eval_edge_type or state.edge_types[0]
    emb = embed_all(state, inputs, None, 1, et, workers=cfg.workers)
    with open(cfg.embeddings, "w", encoding="utf-8") as fh:
        fh.write(f"# {cfg.header()}\n")
        for v, vec in zip(emb.nodes, emb.vectors):
            fh.write(labels[v] + "\t" + ",".join(f"{x:.9g}" for x in vec.astype(np.float32)) + "\n")


def cmd_eval(cfg):
    g = _load_graph(cfg)
    texts = load_node_attributes(cfg.attributes)
    vocab = Vocabulary.load(cfg.vocab)
    state = load_checkpoint(cfg.checkpoint)
    train_g, test = _split(cfg, g)
    inputs = NodeInputs.from_graph(train_g, encode_nodes(train_g, texts, vocab, _arity(state.specs), cfg.max_len))
    queries = unseen_test_nodes(train_g, test) if cfg.unseen_only else None
    report = evaluate_lp(state, train_g, test, inputs, cfg.ks, cfg.sample_nodes, cfg.seed, cfg.eval_edge_type,
                         cfg.eval_mode, queries, workers=cfg.workers)
    write_report(report, cfg.report, cfg.header())
    if cfg.rank_dump:
        write_rank_dump(report, cfg.rank_dump, train_g.labels)
    for k in report.ks:
        log.info("P@%d=%.4f R@%d=%.4f", k, report.precision[k], k, report.recall[k])


def cmd_synth(cfg):
    g, texts, _ = planted_blocks(n_nodes=cfg.synth_nodes, seed=cfg.synth_seed)
    write_fixture(g, texts, cfg.edges, cfg.attributes, cfg.header())


COMMANDS = {
    "build-vocab": cmd_build_vocab,
    "walk": cmd_walk,
    "train": cmd_train,
    "embed": cmd_embed,
    "eval": cmd_eval,
    "synth": cmd_synth,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cne", description="Compositional network embedding")
    sub = parser.add_subparsers(dest="subcommand", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    sub.required = True
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("-v", "--verbose", action="store_true")
        for key in list(SETTINGS) + list(PATHS):
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="VALUE")
    return parser


def run(subcommand, cfg):
    COMMANDS[subcommand](cfg)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    overrides = {k: v for k, v in vars(args).items() if k not in ("subcommand", "config", "verbose")}
    try:
        cfg = parse_config(args.subcommand, args.config, overrides)
        return run(args.subcommand, cfg)
    except Exception as exc:  # one-line diagnostic, nonzero exit
        print(f"cne {args.subcommand}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
