"""Homomorphic encryption contract and a sealed-handle reference provider.

Ciphertexts are opaque handles. The provider keeps the plaintexts in a private
table and only hands them out through :meth:`SealedProvider.decrypt` with the
matching private key, so any other read path is a visible bug.
"""
from __future__ import annotations

import hashlib
import struct
import threading
from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

from .ledger import Kind, Ledger, Observation

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

Plain = Union[int, Tuple[str, int]]


class CryptoError(Exception):
    pass


class KeyMismatch(CryptoError):
    pass


class RangeError(CryptoError):
    pass


@dataclass(frozen=True)
class PublicKey:
    key_id: int
    material: bytes


@dataclass(frozen=True)
class PrivateKey:
    key_id: int
    material: bytes


@dataclass(frozen=True)
class KeyPair:
    pub: PublicKey
    pri: PrivateKey

    @property
    def key_id(self) -> int:
        return self.pub.key_id


@dataclass(frozen=True, slots=True)
class CipherValue:
    key_id: int
    payload: int  # opaque handle into the provider table

    def __repr__(self):
        return f"CipherValue(key={self.key_id}, #{self.payload})"


@dataclass(frozen=True, slots=True)
class CipherBool:
    key_id: int
    payload: int

    def __repr__(self):
        return f"CipherBool(key={self.key_id}, #{self.payload})"


class SealedProvider:
    """Reference provider; one instance per simulated federation."""

    def __init__(self, ledger: Optional[Ledger] = None, clock=lambda: 0.0):
        self.ledger = ledger
        self.clock = clock
        self._lock = threading.Lock()
        self._next_key = 0
        self._owner: Dict[int, Optional[int]] = {}
        self._material: Dict[int, bytes] = {}
        # (key_id, kind, plaintext) -> handle and back; equal plaintexts under
        # one key share a handle, which is what makes ciphertexts deterministic
        self._handles: Dict[Tuple[int, str, int], int] = {}
        self._table: Dict[Tuple[int, int], Tuple[str, object]] = {}
        self._labels: Dict[str, int] = {}

    # keys

    def keygen(self, seed: int, owner: Optional[int] = None) -> KeyPair:
        """Fresh key id; the key material depends only on ``seed``."""
        with self._lock:
            self._next_key += 1
            kid = self._next_key
            self._owner[kid] = owner
        material = hashlib.blake2b(struct.pack(">q", seed), digest_size=16, person=b"fedcore-key").digest()
        self._material[kid] = material
        return KeyPair(PublicKey(kid, material), PrivateKey(kid, material))

    def owner_of(self, key_id: int) -> Optional[int]:
        return self._owner.get(key_id)

    # encoding

    def label_id(self, label: str) -> int:
        with self._lock:
            return self._labels.setdefault(label, len(self._labels) + 1)

    def _pack(self, m: Plain) -> int:
        if isinstance(m, tuple):
            label, k = m
            if not 0 <= k < 2**32:
                raise RangeError(f"core value {k} does not fit a packed pair")
            return (self.label_id(label) << 32) | k
        if isinstance(m, bool) or not isinstance(m, int):
            raise TypeError(f"cannot encrypt {type(m).__name__}")
        return m

    def _seal(self, key_id: int, kind: str, value) -> int:
        slot = (key_id, kind, value)
        payload = self._handles.get(slot)
        if payload is None:
            if kind == "int" and not INT_MIN <= value <= INT_MAX:
                raise RangeError(f"plaintext {value} outside the signed 64-bit range")
            with self._lock:
                payload = self._handles[slot] = len(self._handles) + 1
                self._table[(key_id, payload)] = (kind, value)
        return payload

    def _open(self, key_id: int, payload: int):
        try:
            return self._table[(key_id, payload)]
        except KeyError:
            raise CryptoError("unknown ciphertext handle") from None

    # homomorphic operations, usable by anyone holding the handles

    def encrypt(self, pub: PublicKey, m: Plain) -> CipherValue:
        kid = pub.key_id
        if type(m) is not int:
            m = self._pack(m)
        payload = self._handles.get((kid, "int", m))
        if payload is None:
            if self._material.get(kid) != pub.material:
                raise KeyMismatch(f"unknown public key {kid}")
            payload = self._seal(kid, "int", m)
        return CipherValue(kid, payload)

    def _operands(self, a, b) -> Tuple[int, object, object]:
        kid = a.key_id
        if kid != b.key_id:
            raise KeyMismatch(f"operands under keys {kid} and {b.key_id}")
        table = self._table
        try:
            return kid, table[(kid, a.payload)][1], table[(kid, b.payload)][1]
        except KeyError:
            raise CryptoError("unknown ciphertext handle") from None

    def cmp_gt(self, a: CipherValue, b: CipherValue) -> CipherBool:
        kid, x, y = self._operands(a, b)
        gt = x > y
        return CipherBool(kid, self._handles.get((kid, "bool", gt)) or self._seal(kid, "bool", gt))

    def add(self, a: CipherValue, b: CipherValue) -> CipherValue:
        kid, x, y = self._operands(a, b)
        s = x + y
        if not INT_MIN <= s <= INT_MAX:
            raise RangeError("homomorphic sum overflows the 64-bit range")
        return CipherValue(kid, self._handles.get((kid, "int", s)) or self._seal(kid, "int", s))

    def eq_cipher(self, a: CipherValue, b: CipherValue) -> bool:
        if a.key_id != b.key_id:
            raise KeyMismatch(f"operands under keys {a.key_id} and {b.key_id}")
        return a.payload == b.payload

    # the only read path

    def decrypt(self, pri: PrivateKey, c: Union[CipherValue, CipherBool], observer: Optional[int] = None,
                kind: Kind = Kind.DECRYPTED_VALUE, subject: Optional[int] = None, epoch=None):
        if pri.key_id != c.key_id or self._material.get(pri.key_id) != pri.material:
            if self.ledger is not None and observer is not None:
                self.ledger.record(Observation(observer, Kind.VIOLATION, None,
                                               f"decrypt of key {c.key_id} with key {pri.key_id}",
                                               self.clock(), None, self._owner.get(c.key_id)))
            raise KeyMismatch(f"private key {pri.key_id} cannot open key {c.key_id}")
        kind_tag, value = self._open(c.key_id, c.payload)
        if self.ledger is not None and observer is not None:
            self.ledger.record(Observation(observer, kind, subject, bool(value) if kind_tag == "bool" else value,
                                           self.clock(), epoch, self._owner.get(c.key_id)))
        return bool(value) if kind_tag == "bool" else value

    def unpack(self, packed: int) -> Tuple[str, int]:
        """Inverse of the (label, core) packing, for the key holder."""
        rev = {v: k for k, v in self._labels.items()}
        return rev[packed >> 32], packed & 0xFFFFFFFF
