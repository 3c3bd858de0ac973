"""Centralized trust authority: compact emblem certificates, a chain of
trust with revocation lists, and the protected-facility position registry.

The signature primitive is abstract: any deterministic scheme with 32-byte
public keys and 64-byte signatures plugs in.  ``MockSigner`` is the seeded,
reproducible test double; ``Ed25519Signer`` is the production-grade
implementation on top of ``cryptography``.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .model import Position, distance

KEY_LEN = 32
SIG_LEN = 64
CERT_LEN = 148
_SIGNED_LEN = CERT_LEN - SIG_LEN  # 84 bytes precede the signature

EMBLEM_ID_LEN = 16
ISSUER_ID_LEN = 8

MAX_CHAIN_DEPTH = 4


class TrustError(Exception):
    pass


class InvalidValidityWindow(TrustError):
    pass


class UnknownIssuer(TrustError):
    pass


class UnauthorizedIssuer(TrustError):
    pass


class RegistryUnavailable(TrustError):
    """The position database cannot be reached (fault injected by scenario)."""


# ---------------------------------------------------------------------------
# Signature primitive
# ---------------------------------------------------------------------------


class Signer(Protocol):
    def public_key(self, private_key: bytes) -> bytes: ...

    def sign(self, message: bytes, private_key: bytes) -> bytes: ...

    def verify(self, message: bytes, signature: bytes, public_key: bytes) -> bool: ...


class MockSigner:
    """Deterministic, forgeable test double.

    The public key is a hash of the private key and signatures are
    HMAC-SHA512 keyed by the *public* key, so verification needs no secret.
    Anyone holding the public key could forge — acceptable for a test
    double, never for deployment.
    """

    def __init__(self, seed: int = 0) -> None:
        self._domain = seed.to_bytes(8, "big", signed=True)

    def public_key(self, private_key: bytes) -> bytes:
        _check_key(private_key)
        return hashlib.sha256(b"emblem-mock-pub" + self._domain + private_key).digest()

    def sign(self, message: bytes, private_key: bytes) -> bytes:
        if not message:
            raise ValueError("refusing to sign an empty message")
        return self._mac(message, self.public_key(private_key))

    def verify(self, message: bytes, signature: bytes, public_key: bytes) -> bool:
        if not message or len(signature) != SIG_LEN or len(public_key) != KEY_LEN:
            return False
        return hmac.compare_digest(signature, self._mac(message, public_key))

    def _mac(self, message: bytes, public_key: bytes) -> bytes:
        return hmac.new(self._domain + public_key, message, hashlib.sha512).digest()


class Ed25519Signer:
    """Real deterministic signatures (RFC 8032) behind the same interface."""

    def public_key(self, private_key: bytes) -> bytes:
        _check_key(private_key)
        return (
            Ed25519PrivateKey.from_private_bytes(private_key)
            .public_key()
            .public_bytes_raw()
        )

    def sign(self, message: bytes, private_key: bytes) -> bytes:
        _check_key(private_key)
        if not message:
            raise ValueError("refusing to sign an empty message")
        return Ed25519PrivateKey.from_private_bytes(private_key).sign(message)

    def verify(self, message: bytes, signature: bytes, public_key: bytes) -> bool:
        if not message or len(signature) != SIG_LEN or len(public_key) != KEY_LEN:
            return False
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
            return True
        except InvalidSignature:
            return False


def _check_key(key: bytes) -> None:
    if len(key) != KEY_LEN:
        raise ValueError(f"keys are {KEY_LEN} bytes, got {len(key)}")


_DEFAULT_SIGNER = MockSigner()


def mock_sign(message: bytes, private_key: bytes) -> bytes:
    return _DEFAULT_SIGNER.sign(message, private_key)


def mock_verify(message: bytes, signature: bytes, public_key: bytes) -> bool:
    return _DEFAULT_SIGNER.verify(message, signature, public_key)


def mock_public_key(private_key: bytes) -> bytes:
    return _DEFAULT_SIGNER.public_key(private_key)


def key_from_seed(seed: int) -> bytes:
    """Derive a 32-byte private key from a scenario seed integer."""
    return hashlib.sha256(b"emblem-key" + seed.to_bytes(16, "big", signed=True)).digest()


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


class SubjectType(Enum):
    STATIONARY = 0
    MOBILE_UNIT = 1
    PERSONNEL = 2
    TRANSPORT = 3


_CERT_STRUCT = struct.Struct(">B16s8sBqqiiH32s64s")
assert _CERT_STRUCT.size == CERT_LEN


@dataclass(frozen=True)
class EmblemCertificate:
    """Compact signed credential binding an emblem id to a subject.

    Latitude/longitude are stored as signed fixed-point degrees x 1e7 and
    zeroed for mobile subjects.  The canonical serialization is exactly 148
    bytes, big-endian, no padding; the signature covers the first 84 bytes.
    """

    version: int
    emblem_id: bytes
    issuer_id: bytes
    subject_type: SubjectType
    valid_from: int
    valid_to: int
    lat_e7: int
    lon_e7: int
    zone_radius_m: int
    subject_pubkey: bytes
    signature: bytes

    def __post_init__(self) -> None:
        if len(self.emblem_id) != EMBLEM_ID_LEN:
            raise ValueError("emblem_id must be 16 bytes")
        if len(self.issuer_id) != ISSUER_ID_LEN:
            raise ValueError("issuer_id must be 8 bytes")
        if len(self.subject_pubkey) != KEY_LEN:
            raise ValueError("subject_pubkey must be 32 bytes")
        if len(self.signature) != SIG_LEN:
            raise ValueError("signature must be 64 bytes")
        if not self.valid_from < self.valid_to:
            raise InvalidValidityWindow(
                f"valid_from {self.valid_from} must precede valid_to {self.valid_to}"
            )
        if not 0 <= self.zone_radius_m <= 0xFFFF:
            raise ValueError("zone_radius_m must fit an unsigned 16-bit field")
        if self.subject_type is SubjectType.STATIONARY and self.zone_radius_m < 1:
            raise ValueError("stationary subjects need zone_radius_m >= 1")

    @property
    def lat_deg(self) -> float:
        return self.lat_e7 / 1e7

    @property
    def lon_deg(self) -> float:
        return self.lon_e7 / 1e7

    def signed_bytes(self) -> bytes:
        return self.to_bytes()[:_SIGNED_LEN]

    def to_bytes(self) -> bytes:
        return _CERT_STRUCT.pack(
            self.version,
            self.emblem_id,
            self.issuer_id,
            self.subject_type.value,
            self.valid_from,
            self.valid_to,
            self.lat_e7,
            self.lon_e7,
            self.zone_radius_m,
            self.subject_pubkey,
            self.signature,
        )

    @classmethod
    def from_bytes(cls, raw: bytes) -> "EmblemCertificate":
        if len(raw) != CERT_LEN:
            raise ValueError(f"certificate must be {CERT_LEN} bytes, got {len(raw)}")
        (
            version,
            emblem_id,
            issuer_id,
            subject_type,
            valid_from,
            valid_to,
            lat_e7,
            lon_e7,
            zone_radius_m,
            subject_pubkey,
            signature,
        ) = _CERT_STRUCT.unpack(raw)
        return cls(
            version=version,
            emblem_id=emblem_id,
            issuer_id=issuer_id,
            subject_type=SubjectType(subject_type),
            valid_from=valid_from,
            valid_to=valid_to,
            lat_e7=lat_e7,
            lon_e7=lon_e7,
            zone_radius_m=zone_radius_m,
            subject_pubkey=subject_pubkey,
            signature=signature,
        )


@dataclass(frozen=True)
class CertificateRequest:
    """Subject fields for issuance; the issuer adds version and signature."""

    emblem_id: bytes
    issuer_id: bytes
    subject_type: SubjectType
    valid_from: int
    valid_to: int
    subject_pubkey: bytes
    lat_deg: float = 0.0
    lon_deg: float = 0.0
    zone_radius_m: int = 0


# ---------------------------------------------------------------------------
# Chain of trust
# ---------------------------------------------------------------------------


def _issuer_message(issuer_id: bytes, pubkey: bytes) -> bytes:
    return b"emblem-issuer" + issuer_id + pubkey


@dataclass(frozen=True)
class IssuerCertificate:
    issuer_id: bytes
    pubkey: bytes
    signature: bytes  # by the predecessor link; the root signs itself

    def __post_init__(self) -> None:
        if len(self.issuer_id) != ISSUER_ID_LEN:
            raise ValueError("issuer_id must be 8 bytes")
        if len(self.pubkey) != KEY_LEN or len(self.signature) != SIG_LEN:
            raise ValueError("bad issuer certificate field lengths")


@dataclass(frozen=True)
class TrustChain:
    """Root plus ordered intermediates, each signed by its predecessor."""

    root: IssuerCertificate
    intermediates: tuple[IssuerCertificate, ...] = ()

    def __post_init__(self) -> None:
        if self.depth > MAX_CHAIN_DEPTH:
            raise ValueError(f"chain depth {self.depth} exceeds {MAX_CHAIN_DEPTH}")

    @property
    def depth(self) -> int:
        return 1 + len(self.intermediates)

    @property
    def root_pubkey(self) -> bytes:
        return self.root.pubkey

    def links(self) -> tuple[IssuerCertificate, ...]:
        return (self.root, *self.intermediates)

    def validate(self, signer: Signer) -> bool:
        """True iff the root self-signature and every link signature verify."""
        parent_key = self.root.pubkey
        for link in self.links():
            msg = _issuer_message(link.issuer_id, link.pubkey)
            if not signer.verify(msg, link.signature, parent_key):
                return False
            parent_key = link.pubkey
        return True

    def pubkey_of(self, issuer_id: bytes) -> bytes | None:
        for link in self.links():
            if link.issuer_id == issuer_id:
                return link.pubkey
        return None


def build_chain(
    root_id: bytes,
    root_key: bytes,
    intermediates: Iterable[tuple[bytes, bytes]],
    signer: Signer,
) -> TrustChain:
    """Construct a chain from (issuer_id, private_key) pairs, root first."""
    root_pub = signer.public_key(root_key)
    root_cert = IssuerCertificate(
        root_id, root_pub, signer.sign(_issuer_message(root_id, root_pub), root_key)
    )
    links = []
    parent_key = root_key
    for issuer_id, key in intermediates:
        pub = signer.public_key(key)
        links.append(
            IssuerCertificate(
                issuer_id, pub, signer.sign(_issuer_message(issuer_id, pub), parent_key)
            )
        )
        parent_key = key
    return TrustChain(root_cert, tuple(links))


# ---------------------------------------------------------------------------
# Issuance and verification
# ---------------------------------------------------------------------------


class Verdict(Enum):
    VALID = "Valid"
    EXPIRED = "Expired"
    NOT_YET_VALID = "NotYetValid"
    REVOKED = "Revoked"
    BAD_SIGNATURE = "BadSignature"
    BROKEN_CHAIN = "BrokenChain"


def issue_certificate(
    request: CertificateRequest,
    issuer_key: bytes,
    chain: TrustChain,
    signer: Signer | None = None,
    version: int = 1,
) -> EmblemCertificate:
    """Sign a certificate for the request under an issuer in the chain."""
    signer = signer or _DEFAULT_SIGNER
    if not request.valid_from < request.valid_to:
        raise InvalidValidityWindow(
            f"valid_from {request.valid_from} must precede valid_to {request.valid_to}"
        )
    pub = signer.public_key(issuer_key)
    if chain.pubkey_of(request.issuer_id) != pub:
        raise UnknownIssuer(
            f"issuer key does not match chain entry for {request.issuer_id.hex()}"
        )
    mobile = request.subject_type is not SubjectType.STATIONARY
    unsigned = EmblemCertificate(
        version=version,
        emblem_id=request.emblem_id,
        issuer_id=request.issuer_id,
        subject_type=request.subject_type,
        valid_from=request.valid_from,
        valid_to=request.valid_to,
        lat_e7=0 if mobile else round(request.lat_deg * 1e7),
        lon_e7=0 if mobile else round(request.lon_deg * 1e7),
        zone_radius_m=request.zone_radius_m,
        subject_pubkey=request.subject_pubkey,
        signature=bytes(SIG_LEN),
    )
    signature = signer.sign(unsigned.signed_bytes(), issuer_key)
    return EmblemCertificate.from_bytes(unsigned.to_bytes()[:_SIGNED_LEN] + signature)


def verify_certificate(
    cert: EmblemCertificate,
    chain: TrustChain,
    crl: "RevocationList | None",
    now: int,
    signer: Signer | None = None,
) -> Verdict:
    """Classify a certificate.  All failure modes are verdicts, not errors.

    Reporting order is fixed: signature/chain problems first, then
    revocation, then the validity window.
    """
    signer = signer or _DEFAULT_SIGNER
    if not chain.validate(signer):
        return Verdict.BROKEN_CHAIN
    issuer_pub = chain.pubkey_of(cert.issuer_id)
    if issuer_pub is None:
        return Verdict.BROKEN_CHAIN
    if not signer.verify(cert.signed_bytes(), cert.signature, issuer_pub):
        return Verdict.BAD_SIGNATURE
    if crl is not None and (cert.emblem_id in crl.revoked or cert.issuer_id in crl.revoked):
        return Verdict.REVOKED
    if now < cert.valid_from:
        return Verdict.NOT_YET_VALID
    if now > cert.valid_to:
        return Verdict.EXPIRED
    return Verdict.VALID


# ---------------------------------------------------------------------------
# Revocation
# ---------------------------------------------------------------------------


def _crl_message(issuer_id: bytes, issued_at: int, revoked: frozenset[bytes]) -> bytes:
    parts = [b"emblem-crl", issuer_id, issued_at.to_bytes(8, "big", signed=True)]
    for entry in sorted(revoked):
        parts.append(len(entry).to_bytes(2, "big"))
        parts.append(entry)
    return b"".join(parts)


@dataclass(frozen=True)
class RevocationList:
    """Signed, monotone set of revoked emblem ids (16 B) and issuer ids (8 B)."""

    issuer_id: bytes
    revoked: frozenset[bytes]
    issued_at: int
    signature: bytes

    @classmethod
    def empty(
        cls, issuer_id: bytes, issuer_key: bytes, issued_at: int = 0,
        signer: Signer | None = None,
    ) -> "RevocationList":
        signer = signer or _DEFAULT_SIGNER
        empty: frozenset[bytes] = frozenset()
        sig = signer.sign(_crl_message(issuer_id, issued_at, empty), issuer_key)
        return cls(issuer_id, empty, issued_at, sig)

    def verify(self, issuer_pubkey: bytes, signer: Signer | None = None) -> bool:
        signer = signer or _DEFAULT_SIGNER
        msg = _crl_message(self.issuer_id, self.issued_at, self.revoked)
        return signer.verify(msg, self.signature, issuer_pubkey)


def revoke(
    target: bytes,
    crl: RevocationList,
    issuer_key: bytes,
    issued_at: int | None = None,
    signer: Signer | None = None,
) -> RevocationList:
    """Return a superset list containing ``target``, re-signed.

    The presented key must be the one that signed the previous list; that is
    what authorizes the revocation.  ``issued_at`` strictly increases.
    """
    signer = signer or _DEFAULT_SIGNER
    if len(target) not in (EMBLEM_ID_LEN, ISSUER_ID_LEN):
        raise ValueError("revocation target must be an emblem id or an issuer id")
    pub = signer.public_key(issuer_key)
    if not crl.verify(pub, signer):
        raise UnauthorizedIssuer("key does not match the signer of the current list")
    if issued_at is None:
        issued_at = crl.issued_at + 1
    if issued_at <= crl.issued_at:
        raise ValueError("issued_at must strictly increase")
    revoked = crl.revoked | {target}
    sig = signer.sign(_crl_message(crl.issuer_id, issued_at, revoked), issuer_key)
    return RevocationList(crl.issuer_id, revoked, issued_at, sig)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegistryRecord:
    emblem_id: bytes
    declared_position: Position
    zone_radius_m: float

    def __post_init__(self) -> None:
        if len(self.emblem_id) != EMBLEM_ID_LEN:
            raise ValueError("emblem_id must be 16 bytes")
        if self.zone_radius_m < 0:
            raise ValueError("zone_radius_m must be non-negative")


class Registry:
    """In-memory protected-facility position store.

    Reads take an atomic snapshot; writes are serialized through one lock.
    The ``online`` flag lets scenarios inject database outages.
    """

    def __init__(self) -> None:
        self._records: dict[bytes, RegistryRecord] = {}
        self._lock = threading.Lock()
        self.online = True

    def upsert(self, record: RegistryRecord) -> None:
        with self._lock:
            records = dict(self._records)
            records[record.emblem_id] = record
            self._records = records

    def remove(self, emblem_id: bytes) -> None:
        with self._lock:
            records = dict(self._records)
            records.pop(emblem_id, None)
            self._records = records

    def snapshot(self) -> list[RegistryRecord]:
        return sorted(self._records.values(), key=lambda r: r.emblem_id)

    def __len__(self) -> int:
        return len(self._records)

    def query(self, position: Position, radius: float) -> list[RegistryRecord]:
        return registry_query(position, radius, self)


def registry_query(
    position: Position, radius: float, registry: Registry
) -> list[RegistryRecord]:
    """Records whose declared position lies within radius + zone radius of
    the query point, ordered by emblem id."""
    if radius < 0:
        raise ValueError("query radius must be non-negative")
    if not registry.online:
        raise RegistryUnavailable("registry offline")
    return [
        rec
        for rec in registry.snapshot()
        if distance(position, rec.declared_position) <= radius + rec.zone_radius_m
    ]
