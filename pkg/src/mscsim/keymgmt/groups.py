"""Prime-order subgroup arithmetic for the key-management service.

Everything downstream signs and verifies inside a Schnorr group: a
subgroup of order q (prime) inside the multiplicative group mod p
(prime, q | p-1), written multiplicatively with generator G. The
embedded groups are educational-grade test fixtures, not vetted
production parameters; realism runs can load their own via the text
format below.

Group file format (hex values, '#' comments, blank lines ignored):

    p = <hex>
    q = <hex>
    g = <hex>
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GroupError(Exception):
    pass


def rand_below(rng, bound: int) -> int:
    """Uniform integer in [0, bound) from a numpy generator.

    Draws bound.bit_length() bits and rejection-samples, so it works for
    arbitrarily large bounds and stays reproducible from the stream.
    """
    if bound <= 0:
        raise ValueError("bound must be positive")
    bits = bound.bit_length()
    words = (bits + 31) // 32
    excess = words * 32 - bits
    while True:
        val = 0
        for w in rng.integers(0, 1 << 32, size=words, dtype=np.uint64):
            val = (val << 32) | int(w)
        val >>= excess
        if val < bound:
            return val


def rand_range(rng, low: int, high: int) -> int:
    """Uniform integer in [low, high)."""
    return low + rand_below(rng, high - low)


# Deterministic Miller-Rabin witness set, sufficient for n < 3.3e24.
_SMALL_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_DETERMINISTIC_LIMIT = 3317044064679887385961981

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
                 53, 59, 61, 67, 71, 73, 79, 83, 89, 97)


def is_probable_prime(n: int, rng=None, rounds: int = 40) -> bool:
    """Miller-Rabin: deterministic witnesses below the proven limit,
    random witnesses above it (error below 4**-rounds)."""
    if n < 2:
        return False
    for sp in _SMALL_PRIMES:
        if n == sp:
            return True
        if n % sp == 0:
            return False
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1

    def witness_passes(a: int) -> bool:
        x = pow(a, d, n)
        if x in (1, n - 1):
            return True
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                return True
        return False

    if n < _DETERMINISTIC_LIMIT:
        witnesses = [a for a in _SMALL_WITNESSES if a < n - 1]
    else:
        if rng is None:
            rng = np.random.default_rng(0xD1CE)
        witnesses = [rand_range(rng, 2, n - 1) for _ in range(rounds)]
    return all(witness_passes(a) for a in witnesses)


@dataclass(frozen=True)
class GroupParams:
    """Schnorr group (p, q, g): g generates the order-q subgroup mod p."""

    p: int
    q: int
    g: int

    def __post_init__(self):
        if not is_probable_prime(self.p):
            raise GroupError("p is not prime")
        if not is_probable_prime(self.q):
            raise GroupError("q is not prime")
        if (self.p - 1) % self.q != 0:
            raise GroupError("q does not divide p-1")
        if not 1 < self.g < self.p:
            raise GroupError("generator out of range")
        if pow(self.g, self.q, self.p) != 1:
            raise GroupError("generator order is not q")

    def exp(self, e: int) -> int:
        """G**e mod p."""
        return pow(self.g, e % self.q, self.p)

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def element_bytes(self, x: int) -> bytes:
        """Fixed-width big-endian encoding, sized to p."""
        return x.to_bytes((self.p.bit_length() + 7) // 8, "big")

    def random_scalar(self, rng) -> int:
        """Uniform in [1, q-1]."""
        return rand_range(rng, 1, self.q)


def generate_group(p_bits: int, q_bits: int, rng) -> GroupParams:
    """Fresh Schnorr group: prime q of q_bits, p = q*c + 1 of p_bits."""
    if q_bits >= p_bits:
        raise GroupError("q must be smaller than p")
    while True:
        q = rand_range(rng, 1 << (q_bits - 1), 1 << q_bits) | 1
        if is_probable_prime(q, rng):
            break
    c_bits = p_bits - q_bits
    while True:
        c = rand_range(rng, 1 << (c_bits - 1), 1 << c_bits) & ~1  # even keeps p odd
        p = q * c + 1
        if p.bit_length() == p_bits and is_probable_prime(p, rng):
            break
    while True:
        h = rand_range(rng, 2, p - 1)
        g = pow(h, (p - 1) // q, p)
        if g != 1:
            return GroupParams(p, q, g)


def dump_group(params: GroupParams) -> str:
    return (f"# Schnorr group: |p| = {params.p.bit_length()} bits, "
            f"|q| = {params.q.bit_length()} bits\n"
            f"p = {params.p:x}\nq = {params.q:x}\ng = {params.g:x}\n")


def load_group(text: str) -> GroupParams:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise GroupError(f"line {lineno}: expected 'name = hexvalue'")
        name, _, value = line.partition("=")
        name = name.strip().lower()
        if name not in ("p", "q", "g"):
            raise GroupError(f"line {lineno}: unknown field {name!r}")
        try:
            values[name] = int(value.strip(), 16)
        except ValueError:
            raise GroupError(f"line {lineno}: invalid hex value") from None
    missing = {"p", "q", "g"} - set(values)
    if missing:
        raise GroupError(f"missing fields: {', '.join(sorted(missing))}")
    return GroupParams(values["p"], values["q"], values["g"])


# Exhaustively checkable group for unit tests: 2 generates the order-11
# subgroup of Z_23 (2^11 = 2048 = 89*23 + 1).
TOY_GROUP = GroupParams(p=23, q=11, g=2)


# Pre-generated fixtures (generate_group output, frozen so results are
# stable across runs). DEMO_GROUP carries scenarios whose shareholder
# count exceeds the ten nonzero indices the toy field offers.
_DEMO_TEXT = """
# Schnorr group: |p| = 512 bits, |q| = 160 bits
p = 9c535b99b712f57e14c95f373762b9965160d4681873c39eaf967b29893a8e0e1eb42af09cdbe2e0acf829bc785c59938f85aef671a62eafcaccff3bea4ff36b
q = cfa295643437225c5a62c41a4f3981b3a86f016f
g = 5cfea6f19819ceb97285fa4bd3484be0f4ea784ddb60fe68989f65158ec32673dc9ec8e5ac3d5ef6f3b75c51d09c49b86586aeacab6b660ca0fe6f5891143fb0
"""

_GROUP_2048_TEXT = """
# Schnorr group: |p| = 2048 bits, |q| = 256 bits
p = 8487c39d7f5262dcccc4e02c518919ed1eedacf54a2268ed15a65c0cbda3015b68006d0b7ef5ab6e19e0c66dfa0003574e29e1e3d2ce3a2b2507401a5cf1af0ece8234d80b500069dbe83a41d7f66c551af3e3cb2cf1e510281054269245f4d4c8cc56b596a8786997c5f298ec7fff8b662375cc7c96055591eeb8a9f17db417c5c0afc6b8f6ce4850e7fcfa0873cf803074c78a7e5d5822d3f842fa9b26c364c13c4cc73c653c19d95c031a4a4a8fd48fd4d92b53ef7078e9e812c7e1740898bc78de54907db38b8a3aebb17455922faefbd8178d4bfe2672ecd506b98f1c9982e02a2c31f424b933d27d06c25aedf0e027f7f881a553f35d4ae46e93a0e4a7
q = cc4f12568c3cb8130e2c83d6ae3c1298a363e51beee37b00859dda504cc066ab
g = 24cce60b608070d48ed4499fa05335ce996ebeae038a89f3b3a9655e97dee75223937f3f41e67cfed3d80dfd54ebf43967f0a32e7cc67d0fa0da7559774088e0852129954b034efadf60eba7a8bcaaf1197c3e370361b33c314d3a0ddf6de98343d2e5d4d693433453d360eaee4f45be8e72e4f27dbdb48c5e7ec2618ed66de68dae6b17b7348f9711f9e90d1b6ad637b4f30cc3d9d5df0c825f364395fce3d5cd8515e99b20a5333efae3764e9b8ab9689a2ed7f527602a0a33c38cc780ab5229d2c70d670c1641231eaafeeeea510105c5e9a1b4e2fcc0db14bcca6faed3f21a7d6338e078f53aa9ee1fc451041dda1e4ad653c83f6cc9432277e8c8c0ea2e
"""

DEMO_GROUP = load_group(_DEMO_TEXT)

_group_2048_cache: GroupParams | None = None


def group_2048() -> GroupParams:
    """2048-bit-class fixture; validated on first use, then cached."""
    global _group_2048_cache
    if _group_2048_cache is None:
        _group_2048_cache = load_group(_GROUP_2048_TEXT)
    return _group_2048_cache
