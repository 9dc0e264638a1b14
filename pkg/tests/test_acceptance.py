"""Acceptance gate: one test per release criterion, each printing a single
PASS/FAIL line to the terminal.

The criteria cover scheme correctness and robustness, the security
experiments, end-to-end equivalence of both sample applications with the
plaintext reference, operation counts, the data-flow attack harness, and
public-artifact hygiene.
"""

import random
import time
from contextlib import contextmanager
from decimal import Decimal

import pytest

from cipherflow import addenc, apps, attacks, games, mulenc, reference
from cipherflow.compiler import compile_source
from cipherflow.dlog import build_dlog_table
from cipherflow.groups import make_group
from cipherflow.runtime import decrypt_and_verify_result, encrypt_inputs, execute
from cipherflow.vault import Vault


@contextmanager
def criterion(capsys, number, title):
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"\n[FAIL] criterion {number}: {title}")
        raise
    else:
        with capsys.disabled():
            print(f"\n[PASS] criterion {number}: {title}")


# -- criterion 1: scheme correctness ------------------------------------


def test_criterion_1_scheme_correctness(capsys):
    with criterion(capsys, 1, "both schemes round-trip and evaluate correctly"):
        start = time.time()
        group = make_group("test-tiny")
        rng = random.Random(101)

        mul_keys = mulenc.keygen(group, rng=rng)
        pool = []
        for i in range(200):
            m = group.pow_g(rng.randrange(1, group.q))
            ct = mulenc.encrypt(mul_keys.sk, m, f"m{i}", rng=rng)
            label = mulenc.derive_label(mul_keys.sk, {f"m{i}": 1})
            assert mulenc.decrypt(mul_keys.sk, ct, label) == m
            pool.append((m, f"m{i}", ct))
        for k in range(1, 6):
            batch = rng.sample(pool, k)
            combined = mulenc.evaluate(mul_keys.ek, [ct for _, _, ct in batch])
            expect = 1
            for m, _, _ in batch:
                expect = group.mul(expect, m)
            idents = {}
            for _, ident, _ in batch:
                idents[ident] = idents.get(ident, 0) + 1
            assert mulenc.decrypt(mul_keys.sk, combined, mulenc.derive_label(mul_keys.sk, idents)) == expect

        moduli = (3, 5, 7)
        add_keys = addenc.keygen(group, 3, 3, rng=rng, moduli=moduli)
        table = build_dlog_table(group, 1 << 10)
        d = add_keys.sk.crt.d
        add_pool = []
        for i in range(500):
            m = rng.randrange(d)
            ct = addenc.encrypt(add_keys.sk, m, f"a{i}", rng=rng)
            assert addenc.decrypt(add_keys.sk, ct, addenc.derive_label(add_keys.sk, {f"a{i}": 1}), table) == m
            add_pool.append((m, f"a{i}", ct))
        for trial in range(100):
            k = trial % 5 + 1
            batch = rng.sample(add_pool, k)
            combined = addenc.evaluate(add_keys.ek, [ct for _, _, ct in batch])
            idents = {ident: 1 for _, ident, _ in batch}
            got = addenc.decrypt(add_keys.sk, combined, addenc.derive_label(add_keys.sk, idents), table)
            assert got == sum(m for m, _, _ in batch) % d

        assert time.time() - start < 30


# -- criterion 2: tamper robustness -------------------------------------


def test_criterion_2_tamper_robustness(capsys):
    with criterion(capsys, 2, "random component tampering is rejected (rate <= 5/q)"):
        start = time.time()
        q = make_group("test-tiny").q
        trials = 10 * q + 10
        for scheme in (games.MulHase(), games.AddHase()):
            report = games.run_uf_cpa(scheme, games.CiphertextTamperAdversary, trials, seed=23)
            assert report["attempts"] == trials
            assert report["forgeries"] / report["attempts"] <= 5 / q, (scheme.name, report)
        assert time.time() - start < 120


# -- criterion 3: indistinguishability experiments ----------------------


def test_criterion_3_cpa_experiments(capsys):
    with criterion(capsys, 3, "IND/UF experiments behave as required"):
        for scheme in (games.MulHase(), games.AddHase()):
            adv = games.run_ind_cpa(scheme, games.RandomGuessAdversary, trials=10_000, seed=29)
            assert adv < 0.02, (scheme.name, adv)

            honest = games.run_uf_cpa(scheme, games.HonestEvalAdversary, trials=300, seed=31)
            assert honest["forgeries"] == 0 and honest["rejected"] == 0

            # identifier reuse: the oracle refuses, and reusing the challenge
            # identifier is an automatic loss in every trial
            rng = random.Random(37)
            keys = scheme.keygen(rng)
            oracle = games.EncryptionOracle(scheme, keys, rng)
            oracle.query(scheme.random_message(rng), "dup")
            assert oracle.query(scheme.random_message(rng), "dup") is None
            assert games.run_ind_cpa(scheme, games.IdentifierReuseAdversary, trials=200, seed=41) == 0.5


# -- criteria 4-6 share the application key bundle ----------------------


@pytest.fixture(scope="module")
def app_vault_factory(app_keys, app_table):
    def _make(secret):
        vault = Vault(app_keys, app_table)
        vault.provision(secret, b"acceptance")
        return vault

    return _make


def run_encrypted(public, vault, keys, inputs):
    sess = vault.begin_execution()
    cts = encrypt_inputs(public, keys, inputs)
    result = execute(public, cts, vault, sess)
    assert not result.faulted, result.fault.to_json()
    outputs = {
        e["id"]: decrypt_and_verify_result(vault, sess, public, e["id"], result.outputs[e["id"]])
        for e in public.outputs
    }
    return outputs, result.counters


def test_criterion_4_cart_equivalence_and_counts(capsys, app_keys, app_vault_factory):
    with criterion(capsys, 4, "cart runs match the reference; operation counts are exact"):
        src10 = apps.cart_program(10)
        public, secret = compile_source(src10, app_keys)
        vault = app_vault_factory(secret)

        # the three pricing tiers at n = 10, with their exact op budgets
        cases = [
            ({f"p{i}": 20 for i in range(1, 11)}, 200_000_000, (9, 2)),  # no discount
            ({f"p{i}": 60 for i in range(1, 11)}, 540_000_000, (10, 2)),  # 10% off
            ({f"p{i}": 30 for i in range(1, 11)}, 285_000_000, (10, 3)),  # 5% off
        ]
        for inputs, want, (untrusted, trusted) in cases:
            outputs, counters = run_encrypted(public, vault, app_keys, inputs)
            assert outputs == {"final": want}
            assert (counters.untrusted_total, counters.trusted_total) == (untrusted, trusted)

        rng = random.Random(43)
        for size in [1] + list(range(10, 101, 10)):
            src = apps.cart_program(size)
            pub, sec = compile_source(src, app_keys)
            v = app_vault_factory(sec)
            for _ in range(100):
                cart = apps.random_cart(rng, size)
                expected = reference.run(src, cart)
                outputs, _ = run_encrypted(pub, v, app_keys, cart)
                assert outputs == expected


def test_criterion_5_network_equivalence_and_structure(capsys, app_keys, app_vault_factory):
    with criterion(capsys, 5, "network inference matches the reference with structural op counts"):
        spec = apps.shipped_network()
        src = apps.nn_program(spec)
        public, secret = compile_source(src, app_keys)
        vault = app_vault_factory(secret)
        edges = apps.edge_count(spec)
        neurons = apps.neuron_count(spec)

        rng = random.Random(47)
        for _ in range(100):
            sample = apps.synthetic_input(rng)
            expected = reference.run(src, sample)
            outputs, counters = run_encrypted(public, vault, app_keys, sample)
            assert outputs == expected
            assert counters.hom_mul == edges
            assert counters.hom_add == edges
            assert counters.to_add == edges
            assert counters.cmp_const == neurons
            assert counters.to_mul == neurons
            assert counters.cmp_var == 0


def test_criterion_6_perturbations_always_detected(capsys, app_keys, app_vault_factory):
    with criterion(capsys, 6, "every perturbed run faults or is rejected, with zero leaked bits"):
        cart_src = apps.cart_program(10)
        cart_pub, cart_sec = compile_source(cart_src, app_keys)
        cart_vault = app_vault_factory(cart_sec)
        report = attacks.perturbation_property(
            cart_pub,
            app_keys,
            cart_vault,
            lambda rng: apps.random_cart(rng, 10),
            trials=450,
            seed=53,
        )
        assert report["violations"] == []
        assert report["unintended_bits"] == 0
        assert report["faults"] + report["rejections"] == 450

        nn_spec = apps.xor_network()
        nn_src = apps.nn_program(nn_spec)
        nn_pub, nn_sec = compile_source(nn_src, app_keys)
        nn_vault = app_vault_factory(nn_sec)
        eps = Decimal("0.000001")
        report = attacks.perturbation_property(
            nn_pub,
            app_keys,
            nn_vault,
            lambda rng: {"x1": rng.choice([eps, 1]), "x2": rng.choice([eps, 1])},
            trials=50,
            seed=59,
        )
        assert report["violations"] == []
        assert report["unintended_bits"] == 0

        outcome = attacks.binary_search_attack(
            cart_pub, app_keys, cart_vault, {f"p{i}": 100 for i in range(1, 11)}
        )
        assert outcome.faulted
        assert outcome.fault_site == "_s1"  # the first comparison reached
        assert outcome.intended_bits == 0 and outcome.unintended_bits == 0


def test_criterion_7_public_artifact_hygiene(capsys, app_keys):
    with criterion(capsys, 7, "public artifacts contain no secret material"):
        secrets_blobs = []
        for sk in (app_keys.mul.sk, app_keys.add.sk):
            for exponent in (sk.a, sk.x, sk.y):
                secrets_blobs.append(str(exponent).encode())
                secrets_blobs.append(exponent.to_bytes((exponent.bit_length() + 7) // 8, "big"))
            secrets_blobs.append(sk.prf_key.key)
            secrets_blobs.append(sk.prf_key.key.hex().encode())

        for src in (apps.cart_program(10), apps.nn_program(apps.shipped_network())):
            public, secret = compile_source(src, app_keys)
            blob = public.to_json().encode()
            for needle in secrets_blobs:
                assert needle not in blob
            # conversion labels and comparison thresholds live only in the
            # secret artifact
            assert b'"constant"' not in blob
            assert b'"label"' not in blob
            for info in secret.sites.values():
                for cand in info.candidates:
                    assert str(cand.label).encode() not in blob
                cmp = info.cmp
                if cmp is not None and cmp.constant is not None and abs(cmp.constant) >= 1000:
                    assert str(cmp.constant).encode() not in blob
