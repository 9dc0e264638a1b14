"""Sample applications: tiered-discount shopping cart and fixed-point
neural-network inference.

Both are expressed as source programs in the mini-language, so the entire
pipeline (compile, provision, execute, verify) is exercised end to end.
The neural network uses an epsilon-floored ReLU activation selected by a
comparison and phi merge, which keeps every value entering the
multiplicative domain strictly positive.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from decimal import Decimal

from .fixedpoint import to_scaled

__all__ = [
    "CART_THRESHOLD_HIGH",
    "CART_THRESHOLD_LOW",
    "CART_DISCOUNT_HIGH",
    "CART_DISCOUNT_LOW",
    "APP_CRT_T",
    "APP_CRT_BITS",
    "APP_DLOG_BOUND",
    "cart_program",
    "random_cart",
    "NetworkSpec",
    "nn_program",
    "xor_network",
    "random_network",
    "shipped_network",
    "synthetic_input",
    "edge_count",
    "neuron_count",
]

CART_THRESHOLD_HIGH = 500
CART_THRESHOLD_LOW = 250
CART_DISCOUNT_HIGH = "0.9"  # 10% off above the high threshold
CART_DISCOUNT_LOW = "0.95"  # 5% off above the low threshold

# Application profile for the additive scheme: four 11-bit CRT components
# give a ~2^40 plaintext space while per-component sums of a hundred or so
# addends stay inside a 2^18-entry discrete-log table.
APP_CRT_T = 4
APP_CRT_BITS = 11
APP_DLOG_BOUND = 1 << 18


def cart_program(n_items: int) -> str:
    """Checkout program for a cart of the given size."""
    if n_items < 1:
        raise ValueError("cart needs at least one item")
    lines = [f"input p{i};" for i in range(1, n_items + 1)]
    if n_items == 1:
        lines.append("total = p1;")
    else:
        lines.append("total = p1 + p2;")
        lines.extend(f"total = total + p{i};" for i in range(3, n_items + 1))
    lines += [
        f"if (total > {CART_THRESHOLD_HIGH}) {{",
        f"  final = total * {CART_DISCOUNT_HIGH};",
        "} else {",
        f"  if (total > {CART_THRESHOLD_LOW}) {{",
        f"    final = total * {CART_DISCOUNT_LOW};",
        "  } else {",
        "    final = total;",
        "  }",
        "}",
        "output final;",
    ]
    return "\n".join(lines)


def random_cart(rng: random.Random, n_items: int) -> dict:
    """Item prices drawn uniformly from [0.01, 1000.00], in cents."""
    return {f"p{i}": Decimal(rng.randint(1, 100000)) / 100 for i in range(1, n_items + 1)}


# -- neural network -----------------------------------------------------


@dataclass(frozen=True)
class NetworkSpec:
    sizes: tuple  # layer widths, inputs first
    weights: tuple  # weights[l][neuron][source], as decimal strings
    biases: tuple  # biases[l][neuron]

    def __post_init__(self):
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.sizes) - 1:
            raise ValueError("weight/bias layer count must match topology")
        for l, layer in enumerate(self.weights):
            if len(layer) != self.sizes[l + 1]:
                raise ValueError(f"layer {l + 1} has wrong neuron count")
            for neuron in layer:
                if len(neuron) != self.sizes[l]:
                    raise ValueError(f"a neuron in layer {l + 1} has wrong fan-in")
                for w in neuron:
                    if to_scaled(w) == 0:
                        raise ValueError("zero weights are not representable multiplicatively")


def edge_count(spec: NetworkSpec) -> int:
    return sum(a * b for a, b in zip(spec.sizes, spec.sizes[1:]))


def neuron_count(spec: NetworkSpec) -> int:
    """Hidden plus output neurons (each one costs a comparison)."""
    return sum(spec.sizes[1:])


def nn_program(spec: NetworkSpec) -> str:
    """Fully unrolled forward pass with epsilon-floored ReLU activations."""
    lines = [f"input x{i};" for i in range(1, spec.sizes[0] + 1)]
    prev = [f"x{i}" for i in range(1, spec.sizes[0] + 1)]
    for l, (layer_w, layer_b) in enumerate(zip(spec.weights, spec.biases), start=1):
        current = []
        for j, (wrow, bias) in enumerate(zip(layer_w, layer_b), start=1):
            base = f"l{l}n{j}"
            for i, (src, w) in enumerate(zip(prev, wrow), start=1):
                lines.append(f"{base}p{i} = {src} * {Decimal(str(w))};")
            if len(wrow) == 1:
                lines.append(f"{base}s = {base}p1 + {Decimal(str(bias))};")
            else:
                lines.append(f"{base}s = {base}p1 + {base}p2;")
                lines.extend(f"{base}s = {base}s + {base}p{i};" for i in range(3, len(wrow) + 1))
                lines.append(f"{base}s = {base}s + {Decimal(str(bias))};")
            lines.append(f"if ({base}s > 0) {{ {base}o = {base}s; }} else {{ {base}o = 0.000001; }}")
            current.append(f"{base}o")
        prev = current
    lines.extend(f"output {name} as mul;" for name in prev)
    return "\n".join(lines)


def xor_network() -> NetworkSpec:
    """A 2-2-1 ReLU network computing XOR: y = relu(x1+x2) - 2*relu(x1+x2-1);
    the prediction is y > 0.5."""
    return NetworkSpec(
        sizes=(2, 2, 1),
        weights=((("1", "1"), ("1", "1")), (("1", "-2"),)),
        biases=((("0"), ("-1")), (("0"),)),
    )


def random_network(rng: random.Random, sizes) -> NetworkSpec:
    def weight():
        w = 0
        while w == 0:
            w = round(rng.uniform(-1.5, 1.5), 4)
            if abs(w) < 0.05:
                w = 0
        return str(w)

    weights = tuple(
        tuple(tuple(weight() for _ in range(sizes[l])) for _ in range(sizes[l + 1]))
        for l in range(len(sizes) - 1)
    )
    biases = tuple(
        tuple(str(round(rng.uniform(-1.0, 1.0), 4)) for _ in range(sizes[l + 1]))
        for l in range(len(sizes) - 1)
    )
    return NetworkSpec(tuple(sizes), weights, biases)


def shipped_network() -> NetworkSpec:
    """The bundled 9-4-2 classifier (deterministic weights)."""
    return random_network(random.Random(2024), (9, 4, 2))


def synthetic_input(rng: random.Random, n_features: int = 9) -> dict:
    """Synthetic 9-feature sample in [0.01, 10.00]; strictly positive so
    inputs are valid multiplicative plaintexts."""
    return {f"x{i}": Decimal(rng.randint(1, 1000)) / 100 for i in range(1, n_features + 1)}
