import random

import pytest

from cipherflow import apps
from cipherflow.dlog import build_dlog_table
from cipherflow.keystore import generate_keys
from cipherflow.vault import Vault


@pytest.fixture(scope="session")
def app_keys():
    """Application-profile bundle: 1536-bit group, four 11-bit CRT moduli."""
    return generate_keys(
        "modp-1536",
        crt_t=apps.APP_CRT_T,
        crt_bits=apps.APP_CRT_BITS,
        dlog_bound=apps.APP_DLOG_BOUND,
        rng=random.Random(20240817),
    )


@pytest.fixture(scope="session")
def app_table(app_keys):
    return build_dlog_table(app_keys.group, app_keys.dlog_bound)


@pytest.fixture
def make_vault(app_keys, app_table):
    def _make(secret, nonce=b"test-nonce"):
        vault = Vault(app_keys, app_table)
        vault.provision(secret, nonce)
        return vault

    return _make
