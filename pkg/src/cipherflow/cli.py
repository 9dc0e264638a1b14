"""Command-line front end.

Subcommands cover the full lifecycle: key generation, compilation to the
two artifact files, trusted-module provisioning with attestation, encrypted
execution, the attack and security-experiment harnesses, and a small
benchmark.  Every file the untrusted side may receive is checked against
the ``.sk`` naming convention; secret material only ever lands in
``.sk``-named files and the CLI refuses to write it anywhere else.
"""

from __future__ import annotations

import argparse
import csv
import json
import secrets
import sys
import time
from decimal import Decimal
from pathlib import Path

from . import apps, attacks, games
from .artifact import PublicArtifact, SecretArtifact
from .dlog import build_dlog_table
from .fixedpoint import from_scaled
from .keystore import (
    SecretPathError,
    ensure_public_path,
    generate_keys,
    is_secret_path,
    load_keys,
    save_keys,
)
from .runtime import decrypt_and_verify_result, encrypt_inputs, execute
from .vault import Vault, attestation_digest

PUBLIC_ARTIFACT = "program.json"
SECRET_ARTIFACT = "conversions.sk.json"


def _load_bundle(keys_dir: str):
    return load_keys(keys_dir)


def _load_artifacts(artifacts_dir: str):
    directory = Path(artifacts_dir)
    public = PublicArtifact.from_json((directory / PUBLIC_ARTIFACT).read_text())
    secret = SecretArtifact.from_json((directory / SECRET_ARTIFACT).read_text())
    return public, secret


def _make_vault(keys, secret: SecretArtifact, nonce: bytes = None) -> Vault:
    table = build_dlog_table(keys.group, keys.dlog_bound, budget=max(1 << 22, keys.dlog_bound))
    vault = Vault(keys, table)
    vault.provision(secret, nonce or secrets.token_bytes(16))
    return vault


def _read_inputs(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    return {name: Decimal(str(value)) for name, value in data.items()}


def _program_text(args) -> str:
    if args.source:
        text = Path(args.source).read_text()
        if args.app:
            raise SystemExit("give either --source or --app, not both")
        return text
    if args.app == "cart":
        return apps.cart_program(args.items)
    if args.app == "nn":
        return apps.nn_program(apps.shipped_network())
    raise SystemExit("one of --source or --app {cart,nn} is required")


# -- subcommands --------------------------------------------------------


def cmd_keygen(args) -> int:
    import random

    rng = random.Random(args.seed) if args.seed is not None else None
    keys = generate_keys(
        args.profile,
        crt_t=args.crt_t,
        crt_bits=args.crt_bits,
        dlog_bound=args.dlog_bound,
        rng=rng,
    )
    save_keys(args.keys, keys)
    print(f"wrote {Path(args.keys) / 'keys.ek'} and {Path(args.keys) / 'keys.sk'}")
    return 0


def cmd_compile(args) -> int:
    from .compiler import compile_source

    keys = _load_bundle(args.keys)
    public, secret = compile_source(_program_text(args), keys)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    public_path = ensure_public_path(out / PUBLIC_ARTIFACT)
    secret_path = out / SECRET_ARTIFACT
    assert is_secret_path(secret_path)
    public_path.write_text(public.to_json())
    secret_path.write_text(secret.to_json())
    n_sites = len(secret.sites)
    print(f"wrote {public_path} and {secret_path} ({n_sites} trusted sites)")
    return 0


def cmd_provision(args) -> int:
    keys = _load_bundle(args.keys)
    _, secret = _load_artifacts(args.artifacts)
    nonce = bytes.fromhex(args.nonce) if args.nonce else secrets.token_bytes(16)
    vault = Vault(keys, build_dlog_table(keys.group, keys.dlog_bound, budget=max(1 << 22, keys.dlog_bound)))
    quote = vault.provision(secret, nonce)
    expected = attestation_digest(secret, keys, nonce)
    print(json.dumps({
        "nonce": nonce.hex(),
        "quote": quote.digest.hex(),
        "attested": quote.digest == expected,
    }, indent=1))
    return 0 if quote.digest == expected else 1


def cmd_run(args) -> int:
    keys = _load_bundle(args.keys)
    public, secret = _load_artifacts(args.artifacts)
    vault = _make_vault(keys, secret)
    session = vault.begin_execution()
    cts = encrypt_inputs(public, keys, _read_inputs(args.inputs))
    result = execute(public, cts, vault, session)
    report = {"faulted": result.faulted}
    if result.faulted:
        report["fault"] = json.loads(result.fault.to_json())
    else:
        outputs = {}
        for entry in public.outputs:
            value = decrypt_and_verify_result(
                vault, session, public, entry["id"], result.outputs[entry["id"]], result.counters
            )
            outputs[entry["id"]] = str(from_scaled(value))
        report["outputs"] = outputs
    report["counters"] = result.counters.as_dict()
    print(json.dumps(report, indent=1))
    return 1 if result.faulted else 0


def cmd_attack(args) -> int:
    keys = _load_bundle(args.keys)
    public, secret = _load_artifacts(args.artifacts)
    vault = _make_vault(keys, secret)
    inputs = _read_inputs(args.inputs)
    if args.script:
        actions = [
            attacks.AttackAction(entry["kind"], tuple(entry.get("params", ())))
            for entry in json.loads(Path(args.script).read_text())
        ]
        outcomes = [attacks.run_with_action(public, keys, vault, inputs, a) for a in actions]
        print(json.dumps([json.loads(o.to_json()) for o in outcomes], indent=1))
        return 0
    if args.builtin == "binary-search":
        outcome = attacks.binary_search_attack(public, keys, vault, inputs)
        print(outcome.to_json())
        return 0
    if args.builtin == "null":
        outcome = attacks.null_attack(public, keys, vault, inputs)
        print(outcome.to_json())
        return 0
    report = attacks.perturbation_property(
        public, keys, vault, lambda rng: inputs, args.trials, seed=args.seed
    )
    print(json.dumps(report, indent=1))
    return 0 if not report["violations"] else 1


def cmd_games(args) -> int:
    report = {}
    schemes = [games.MulHase(), games.AddHase()] if args.scheme == "both" else [
        games.MulHase() if args.scheme == "mul" else games.AddHase()
    ]
    for scheme in schemes:
        report[scheme.name] = {
            "ind_cpa_random_guess_advantage": games.run_ind_cpa(
                scheme, games.RandomGuessAdversary, args.trials, seed=args.seed
            ),
            "ind_cpa_component_compare_advantage": games.run_ind_cpa(
                scheme, games.ComponentCompareAdversary, args.trials, seed=args.seed + 1
            ),
            "uf_cpa_tamper": games.run_uf_cpa(
                scheme, games.CiphertextTamperAdversary, args.trials, seed=args.seed + 2
            ),
            "uf_cpa_honest_eval": games.run_uf_cpa(
                scheme, games.HonestEvalAdversary, min(args.trials, 200), seed=args.seed + 3
            ),
        }
    print(json.dumps(report, indent=1))
    return 0


def cmd_bench(args) -> int:
    keys = _load_bundle(args.keys)
    public, secret = _load_artifacts(args.artifacts)
    vault = _make_vault(keys, secret)
    inputs = _read_inputs(args.inputs)
    rows = []
    for run_id in range(args.trials):
        start = time.perf_counter()
        session = vault.begin_execution()
        cts = encrypt_inputs(public, keys, inputs)
        result = execute(public, cts, vault, session)
        if not result.faulted:
            for entry in public.outputs:
                decrypt_and_verify_result(
                    vault, session, public, entry["id"], result.outputs[entry["id"]], result.counters
                )
        wall_ms = (time.perf_counter() - start) * 1000
        rows.append(
            {
                "run-id": run_id,
                "wall-ms": f"{wall_ms:.2f}",
                "untrusted-ops": result.counters.untrusted_total,
                "trusted-ops": result.counters.trusted_total,
                "faulted": int(result.faulted),
            }
        )
    if args.csv:
        path = ensure_public_path(args.csv)
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["run-id", "wall-ms", "untrusted-ops", "trusted-ops", "faulted"])
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {path}")
    else:
        for row in rows:
            print(",".join(str(row[k]) for k in ("run-id", "wall-ms", "untrusted-ops", "trusted-ops", "faulted")))
    return 0


def cmd_generate(args) -> int:
    import random

    rng = random.Random(args.seed)
    if args.app == "cart":
        values = apps.random_cart(rng, args.items)
    else:
        values = apps.synthetic_input(rng)
    print(json.dumps({k: str(v) for k, v in values.items()}, indent=1))
    return 0


# -- argument parsing ---------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cipherflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key bundle")
    p.add_argument("--profile", default="modp-1536")
    p.add_argument("--keys", required=True, help="directory for keys.ek / keys.sk")
    p.add_argument("--crt-t", type=int, default=apps.APP_CRT_T)
    p.add_argument("--crt-bits", type=int, default=apps.APP_CRT_BITS)
    p.add_argument("--dlog-bound", type=int, default=apps.APP_DLOG_BOUND)
    p.add_argument("--seed", type=int, default=None, help="deterministic keys (testing only)")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("compile", help="compile a program into artifacts")
    p.add_argument("--keys", required=True)
    p.add_argument("--out", required=True, help="artifact output directory")
    p.add_argument("--source", help="program source file")
    p.add_argument("--app", choices=["cart", "nn"], help="built-in sample application")
    p.add_argument("--items", type=int, default=10, help="cart size for --app cart")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("provision", help="provision the trusted module and check attestation")
    p.add_argument("--keys", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--nonce", help="hex nonce (random when omitted)")
    p.set_defaults(func=cmd_provision)

    p = sub.add_parser("run", help="execute a compiled program over encrypted inputs")
    p.add_argument("--keys", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--inputs", required=True, help="JSON file of input values")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("attack", help="run the data-flow attack harness")
    p.add_argument("--keys", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--script", help="JSON attack script (list of actions)")
    p.add_argument("--builtin", choices=["binary-search", "null"])
    p.add_argument("--trials", type=int, default=50, help="random perturbation trials")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("games", help="run the chosen-plaintext security experiments")
    p.add_argument("--scheme", choices=["mul", "add", "both"], default="both")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_games)

    p = sub.add_parser("bench", help="time repeated encrypted executions")
    p.add_argument("--keys", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--inputs", required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--csv", help="CSV output path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("generate", help="generate sample inputs for the built-in apps")
    p.add_argument("--app", choices=["cart", "nn"], required=True)
    p.add_argument("--items", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SecretPathError as exc:
        print(f"refusing: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
