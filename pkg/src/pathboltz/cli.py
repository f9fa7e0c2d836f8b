"""``pathboltz`` command line.

Exit status: 0 on success, 2 on invalid input (bad flags, unreadable or
malformed files), 3 on numerical failure. Tables go out as CSV, structured
objects as JSON. With ``--output FILE`` a run manifest is written to
``FILE.manifest.json`` (or to ``--manifest``), recording argv, parameters,
tool version and SHA-256 digests of every input and output file.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from pathlib import Path


from . import __version__
from .circuits import emit_circuit, probabilities, sample, serialize
from .entropy import (
    MultiplicityMode,
    bethe_terms,
    chain_entropy_terms,
    kikuchi_terms,
    network_complex,
)
from .network import ActivationKind, LayeredNetwork, classical_joint
from .operators import EvolutionParameter, HermitianOperator, read_matrix_csv
from .path_integral import (
    SliceScheme,
    amplitude_by_contraction,
    amplitude_by_enumeration,
    build_chain,
    partition_function,
    trotter_error,
)
from .rbm import RbmParams, gibbs_sample, gibbs_table, spin_configurations, spin_label
from .trainer import (
    FitConfig,
    TargetGibbs,
    TargetPropagator,
    fit,
    read_pairs_csv,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3


class InputError(Exception):
    """Invalid user input; reported with exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _read(path: str, ctx) -> str:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    ctx.inputs.append(path)
    return text


def _load(path, loader, ctx, what):
    text = _read(path, ctx)
    try:
        return loader(text)
    except (ValueError, KeyError, TypeError) as e:
        raise InputError(f"{path}: invalid {what}: {e}") from None


def _load_hamiltonian(path, ctx) -> HermitianOperator:
    m = _load(path, read_matrix_csv, ctx, "matrix CSV")
    try:
        return HermitianOperator(m)
    except ValueError as e:
        raise InputError(f"{path}: {e}") from None


def _beta(text: str) -> EvolutionParameter:
    try:
        z = complex(text.replace(" ", ""))
    except ValueError:
        raise InputError(f"--beta: cannot parse {text!r} as a number") from None
    if z.imag == 0 and z.real > 0:
        return EvolutionParameter.thermal(z.real)
    if z.real == 0 and z.imag != 0:
        return EvolutionParameter.real_time(z.imag)
    return EvolutionParameter(z)


def _slice_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("slice counts must be positive")
    return vals


_SCHEMES = {"exact": SliceScheme.EXACT, "first": SliceScheme.SPLIT_FIRST_ORDER,
            "strang": SliceScheme.SPLIT_STRANG}


class _Context:
    def __init__(self):
        self.inputs: list[str] = []
        self.outputs: list[str] = []


# -- subcommands ---------------------------------------------------------------

def cmd_propagate(args, ctx) -> str:
    h = _load_hamiltonian(args.hamiltonian, ctx)
    for name in ("start", "end"):
        if not 0 <= getattr(args, name) < h.dim:
            raise InputError(f"--{name} must be in [0, {h.dim})")
    chain = build_chain(h, _beta(args.beta), args.slices, _SCHEMES[args.scheme])
    if args.dump_chain:
        Path(args.dump_chain).write_text(chain.to_json())
        ctx.outputs.append(args.dump_chain)
    if args.method == "enumerate":
        amp = amplitude_by_enumeration(chain, args.start, args.end)
    else:
        amp = amplitude_by_contraction(chain, args.start, args.end)
    return _csv_text(["start", "end", "re", "im"],
                     [[args.start, args.end, _g(amp.real), _g(amp.imag)]])


def cmd_partition(args, ctx) -> str:
    h = _load_hamiltonian(args.hamiltonian, ctx)
    z = partition_function(h, _beta(args.beta))
    if z.imag == 0:
        return f"Z = {z.real!r}\n"
    return f"Z = {z!r}\n"


def cmd_trotter(args, ctx) -> str:
    h = _load_hamiltonian(args.hamiltonian, ctx)
    beta = _beta(args.beta)
    scheme = _SCHEMES[args.scheme]
    rows = []
    for P in args.slices:
        err = trotter_error(h, beta, P, scheme)
        err2 = trotter_error(h, beta, 2 * P, scheme)
        ratio = err / err2 if err2 > 0 else float("nan")
        rows.append([P, _g(err), _g(ratio)])
    return _csv_text(["P", "error", "ratio_P_to_2P"], rows)


def cmd_rbm(args, ctx) -> str:
    params = _load(args.spec, RbmParams.from_json, ctx, "RBM spec")
    if args.sample:
        table = gibbs_sample(params, args.sweeps, args.burn_in, args.seed)
    else:
        table = gibbs_table(params)
    V = spin_configurations(params.n)
    H = spin_configurations(params.p)
    rows = [[spin_label(V[i]), spin_label(H[j]), _g(m)] for (i, j), m in table.rows()]
    return _csv_text(["v", "h", "probability"], rows)


def cmd_entropy(args, ctx) -> str:
    net = _load(args.network, LayeredNetwork.from_json, ctx, "network")
    joint = classical_joint(net)
    if args.mode == "chain":
        if net.higher:
            raise InputError("--mode chain applies to chains; network has k-local terms")
        terms = chain_entropy_terms(joint)
    elif args.mode == "bethe":
        if net.higher:
            raise InputError("--mode bethe needs a tree; network has k-local terms")
        names = net.names
        terms = bethe_terms(joint, list(zip(names, names[1:])))
    else:
        cx = network_complex(net, MultiplicityMode(args.multiplicity))
        terms = kikuchi_terms(joint, cx)
    rows = [[t.kind, "|".join(t.variables), _g(t.entropy), _g(t.weight), _g(t.contribution)]
            for t in terms]
    rows.append(["total", "", "", "", _g(sum(t.contribution for t in terms))])
    return _csv_text(["kind", "variables", "entropy", "weight", "contribution"], rows)


def cmd_train(args, ctx) -> str:
    net = _load(args.network, LayeredNetwork.from_json, ctx, "network")
    sources = [s for s in (args.data, args.propagator, args.rbm_target) if s]
    if len(sources) != 1:
        raise InputError("give exactly one of --data, --propagator, --rbm-target")
    if args.data:
        data = _load(args.data, lambda t: read_pairs_csv(t, net.dims[0], net.dims[-1]),
                     ctx, "pairs CSV")
    elif args.propagator:
        data = TargetPropagator(_load(args.propagator, read_matrix_csv, ctx, "matrix CSV"))
    else:
        params = _load(args.rbm_target, RbmParams.from_json, ctx, "RBM spec")
        data = TargetGibbs(gibbs_table(params))
    try:
        cfg = FitConfig(loss=args.loss, optimizer=args.opt, learning_rate=args.lr,
                        steps=args.steps, seed=args.seed, gradient_mode=args.gradient,
                        init=args.init)
        result = fit(net, data, cfg, ActivationKind(args.activation))
    except (ValueError, TypeError) as e:
        raise InputError(str(e)) from None
    if args.out:
        Path(args.out).write_text(result.network.to_json(indent=2) + "\n")
        ctx.outputs.append(args.out)
    if args.trace:
        Path(args.trace).write_text(
            _csv_text(["step", "loss"], [[k, _g(v)] for k, v in enumerate(result.trace)])
        )
        ctx.outputs.append(args.trace)
    return _csv_text(["steps", "initial_loss", "best_loss"],
                     [[args.steps, _g(result.trace[0]), _g(result.best_loss)]])


def cmd_circuit(args, ctx) -> str:
    net = _load(args.network, LayeredNetwork.from_json, ctx, "network")
    try:
        circuit = emit_circuit(net, args.time)
    except ValueError as e:
        raise InputError(str(e)) from None
    if args.action == "emit":
        return circuit.to_json() + "\n" if args.format == "json" else serialize(circuit)
    counts = sample(circuit, args.shots, args.seed)
    probs = probabilities(circuit)
    rows = [[bits, c, _g(probs[int(bits, 2)])] for bits, c in counts.items()]
    return _csv_text(["bitstring", "count", "probability"], rows)


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pathboltz", description="Path integrals and Boltzmann machines at desk scale.")
    p.add_argument("--version", action="version", version=f"pathboltz {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--output", help="write the result here instead of stdout")
        sp.add_argument("--manifest", help="manifest path (default: OUTPUT.manifest.json)")
        return sp

    sp = common(sub.add_parser("propagate", help="one propagator element from a sliced chain"))
    sp.add_argument("--hamiltonian", required=True)
    sp.add_argument("--beta", required=True, help="real (thermal), imaginary like 1.3j (real time) or complex")
    sp.add_argument("--slices", type=int, default=1)
    sp.add_argument("--scheme", choices=list(_SCHEMES), default="exact")
    sp.add_argument("--start", type=int, default=0)
    sp.add_argument("--end", type=int, default=0)
    sp.add_argument("--method", choices=["contract", "enumerate"], default="contract")
    sp.add_argument("--dump-chain", help="write the chain as JSON")
    sp.set_defaults(func=cmd_propagate)

    sp = common(sub.add_parser("partition", help="Z = Tr exp(-beta H)"))
    sp.add_argument("--hamiltonian", required=True)
    sp.add_argument("--beta", required=True)
    sp.set_defaults(func=cmd_partition)

    sp = common(sub.add_parser("trotter", help="splitting error versus slice count"))
    sp.add_argument("--hamiltonian", required=True)
    sp.add_argument("--beta", required=True)
    sp.add_argument("--scheme", choices=list(_SCHEMES), default="first")
    sp.add_argument("--slices", type=_slice_list, default=[8, 16, 32])
    sp.set_defaults(func=cmd_trotter)

    sp = common(sub.add_parser("rbm", help="exact or sampled RBM Gibbs table"))
    sp.add_argument("--spec", required=True)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", default=True)
    mode.add_argument("--sample", action="store_true")
    sp.add_argument("--sweeps", type=int, default=100000)
    sp.add_argument("--burn-in", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_rbm)

    sp = common(sub.add_parser("entropy", help="entropy terms of a network's path distribution"))
    sp.add_argument("--network", required=True)
    sp.add_argument("--mode", choices=["chain", "bethe", "kikuchi"], default="chain")
    sp.add_argument("--multiplicity", choices=["containment", "moebius"], default="moebius")
    sp.set_defaults(func=cmd_entropy)

    sp = common(sub.add_parser("train", help="fit network parameters to targets"))
    sp.add_argument("--network", required=True)
    sp.add_argument("--data", help="pairs CSV: inputs then targets per row")
    sp.add_argument("--propagator", help="target propagator as matrix CSV")
    sp.add_argument("--rbm-target", help="RBM spec whose Gibbs table is the target")
    sp.add_argument("--activation", choices=[a.value for a in ActivationKind], default="identity")
    sp.add_argument("--loss", choices=["sq", "kl"], default="sq")
    sp.add_argument("--opt", choices=["adam", "gd"], default="adam")
    sp.add_argument("--lr", type=float, default=0.01)
    sp.add_argument("--steps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--gradient", choices=["analytic", "central"], default="analytic")
    sp.add_argument("--init", action="store_true", help="reinitialize parameters from --seed")
    sp.add_argument("--out", help="trained network JSON")
    sp.add_argument("--trace", help="loss trace CSV")
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("circuit", help="emit or simulate the rotation-gate template"))
    sp.add_argument("action", choices=["emit", "sim"])
    sp.add_argument("--network", required=True)
    sp.add_argument("--time", type=float, default=1.0)
    sp.add_argument("--shots", type=int, default=100000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["qasm", "json"], default="qasm")
    sp.set_defaults(func=cmd_circuit)
    return p


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(path, argv, args, ctx):
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    manifest = {
        "tool": "pathboltz",
        "version": __version__,
        "subcommand": args.command,
        "argv": list(argv),
        "parameters": params,
        "seed": params.get("seed"),
        "inputs": {p: _digest(p) for p in ctx.inputs},
        "outputs": {p: _digest(p) for p in ctx.outputs},
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        for name in ("slices", "sweeps", "steps", "shots"):
            val = getattr(args, name, None)
            if isinstance(val, int) and val < 1:
                raise InputError(f"--{name} must be >= 1")
        ctx = _Context()
        text = args.func(args, ctx)
        if args.output:
            Path(args.output).write_text(text)
            ctx.outputs.insert(0, args.output)
        else:
            sys.stdout.write(text)
        manifest = args.manifest or (args.output + ".manifest.json" if args.output else None)
        if manifest:
            _write_manifest(manifest, argv, args, ctx)
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)
    except InputError as e:
        print(f"pathboltz: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ArithmeticError as e:
        print(f"pathboltz: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, RuntimeError, json.JSONDecodeError) as e:
        print(f"pathboltz: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
