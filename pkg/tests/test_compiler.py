import random

import pytest

from cipherflow import addenc, apps, mulenc
from cipherflow.artifact import PublicArtifact, SecretArtifact
from cipherflow.compiler import CompileError, compile_source


def walk(block):
    for instr in block:
        yield instr
        if instr["op"] == "if":
            yield from walk(instr["then"])
            yield from walk(instr["else"])


def sites_by_kind(secret):
    kinds = {}
    for site, info in secret.sites.items():
        kinds.setdefault(info.kind, []).append(site)
    return kinds


def test_pure_additive_program_needs_no_conversions(app_keys):
    public, secret = compile_source(
        "input a; input b; s = a + b; s = s - a; output s;", app_keys
    )
    assert sites_by_kind(secret) == {}
    assert [i["op"] for i in public.program] == ["add", "sub"]
    assert public.constants == {}


def test_cart_has_two_cmp_sites_and_one_shared_to_mul_site(app_keys):
    public, secret = compile_source(apps.cart_program(10), app_keys)
    kinds = sites_by_kind(secret)
    assert len(kinds["cmp"]) == 2
    assert len(kinds["to_mul"]) == 1
    assert set(kinds) == {"cmp", "to_mul"}
    # the single to-mul site serves both discount arms
    (to_mul_site,) = kinds["to_mul"]
    converts = [i for i in walk(public.program) if i["op"] == "convert"]
    assert {c["site"] for c in converts} == {to_mul_site}
    assert len(converts) == 2


def test_input_domains_follow_first_use(app_keys):
    public, _ = compile_source(
        "input a; input b; input c; p = a * b; s = c + 1; q = p * 1.5; output s; output q;",
        app_keys,
    )
    domains = {e["id"]: e["domain"] for e in public.inputs}
    assert domains == {"a": "mul", "b": "mul", "c": "add"}


def test_conversion_site_label_matches_provenance(app_keys):
    _, secret = compile_source(
        "input a; input b; s = a + b; p = s * 2; output p;", app_keys
    )
    (site,) = sites_by_kind(secret)["to_mul"]
    info = secret.sites[site]
    (cand,) = info.candidates
    assert cand.guards == frozenset()
    assert cand.label == addenc.derive_label(app_keys.add.sk, {"a": 1, "b": 1}).value
    assert info.input_domain == "add" and info.out_id == site


def test_subtraction_labels_use_signed_multiplicities(app_keys):
    _, secret = compile_source("input a; input b; s = a - b; p = s * 2; output p;", app_keys)
    (site,) = sites_by_kind(secret)["to_mul"]
    (cand,) = secret.sites[site].candidates
    assert cand.label == addenc.derive_label(app_keys.add.sk, {"a": 1, "b": -1}).value


def test_constants_are_encrypted_and_decryptable(app_keys):
    public, _ = compile_source("input a; p = a * 1.5; output p;", app_keys)
    (ident,) = [k for k, v in public.constants.items() if v["domain"] == "mul"]
    ct = mulenc.MulCiphertext.parse(app_keys.group, public.constants[ident]["ct"])
    m = mulenc.decrypt(app_keys.mul.sk, ct, mulenc.derive_label(app_keys.mul.sk, {ident: 1}))
    assert mulenc.decode_int(app_keys.group, m) == 1_500_000


def test_cmp_threshold_stays_out_of_public_artifact(app_keys):
    public, secret = compile_source(apps.cart_program(3), app_keys)
    (s1, s2) = sorted(sites_by_kind(secret)["cmp"])
    assert {secret.sites[s1].cmp.constant, secret.sites[s2].cmp.constant} == {
        500_000_000,
        250_000_000,
    }
    assert b"500" not in public.to_json().encode() or "500" not in str(public.program)


def test_phi_value_carries_guarded_candidates(app_keys):
    _, secret = compile_source(
        "input t; if (t > 5) { f = t + 1; } else { f = t - 1; } g = f * 2; output g;",
        app_keys,
    )
    kinds = sites_by_kind(secret)
    (cmp_site,) = kinds["cmp"]
    (conv,) = kinds["to_mul"]
    cands = secret.sites[conv].candidates
    assert {c.guards for c in cands} == {
        frozenset({(cmp_site, True)}),
        frozenset({(cmp_site, False)}),
    }


def test_guard_simplification_collapses_identical_arms(app_keys):
    _, secret = compile_source(
        "input t; if (t > 5) { f = t + 1; } else { f = t + 1; } g = f * 2; output g;",
        app_keys,
    )
    (conv,) = sites_by_kind(secret)["to_mul"]
    (cand,) = secret.sites[conv].candidates
    assert cand.guards == frozenset()


def test_two_operand_comparison(app_keys):
    public, secret = compile_source(
        "input a; input b; if (a > b) { f = a; } else { f = b; } output f;", app_keys
    )
    (site,) = sites_by_kind(secret)["cmp"]
    params = secret.sites[site].cmp
    assert params.constant is None and params.second_domain == "add"
    (instr,) = [i for i in walk(public.program) if i["op"] == "cmp"]
    assert instr["a"] == "a" and instr["b"] == "b"


def test_rescale_scheduled_into_to_add_conversion(app_keys):
    _, secret = compile_source("input a; p = a * 1.5; s = p + 1; output s;", app_keys)
    (conv,) = sites_by_kind(secret)["to_add"]
    (cand,) = secret.sites[conv].candidates
    assert cand.rescale_pow == 6  # scale 12 product back down to scale 6


def test_negative_constant_sign_folded(app_keys):
    _, secret = compile_source("input a; p = a * -2; s = p + 1; output s;", app_keys)
    (conv,) = sites_by_kind(secret)["to_add"]
    (cand,) = secret.sites[conv].candidates
    assert cand.sign == -1


def test_output_candidates_per_branch(app_keys):
    _, secret = compile_source(apps.cart_program(2), app_keys)
    cands = secret.outputs["final"]
    assert len(cands) == 3
    assert {c.domain for c in cands} == {"add", "mul"}


def test_zero_mul_constant_rejected(app_keys):
    with pytest.raises(CompileError):
        compile_source("input a; p = a * 0; output p;", app_keys)


def test_branch_dependent_domain_rejected(app_keys):
    src = (
        "input t; input a;"
        "if (t > 1) { f = a * 2; } else { f = a + 1; }"
        "g = f + 1; output g;"
    )
    with pytest.raises(CompileError):
        compile_source(src, app_keys)


def test_comparison_result_in_arithmetic_rejected(app_keys):
    with pytest.raises(CompileError):
        compile_source("input a; b = a > 1; c = b + 1; output c;", app_keys)


def test_artifact_json_roundtrip(app_keys):
    public, secret = compile_source(apps.cart_program(3), app_keys, rng=random.Random(4))
    public2 = PublicArtifact.from_json(public.to_json())
    assert public2.program == public.program
    assert public2.constants == public.constants
    assert public2.ek_mul == public.ek_mul
    secret2 = SecretArtifact.from_json(secret.to_json())
    assert secret2.sites == secret.sites
    assert secret2.outputs == secret.outputs


def test_unsupported_format_version_rejected(app_keys):
    public, secret = compile_source("input a; output a;", app_keys)
    from cipherflow.artifact import ArtifactError

    bad = public.to_json().replace('"format_version": 1', '"format_version": 99')
    with pytest.raises(ArtifactError):
        PublicArtifact.from_json(bad)
    bad = secret.to_json().replace('"format_version": 1', '"format_version": 99')
    with pytest.raises(ArtifactError):
        SecretArtifact.from_json(bad)
