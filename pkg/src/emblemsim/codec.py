"""Beacon frame codec: certificate framing with CRC-16 error detection and
Hamming(7,4) forward error correction, under per-band payload budgets.

Frame layout (pre-FEC, big-endian):

    [0xA5][0x5A][band_id:1][payload_len:2][payload:n][crc16:2]

The CRC covers band_id || payload_len || payload.  FEC is applied over the
entire frame: each nibble (high first) becomes a 7-bit codeword in the bit
order p1 p2 d1 p3 d2 d3 d4, packed MSB-first and zero-padded to a byte
boundary, so n frame bytes code to ceil(14n/8) bytes on the air.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import FrequencyBand
from .trust import CERT_LEN, EmblemCertificate

PREAMBLE = b"\xa5\x5a"
_HEADER_LEN = 5  # preamble + band_id + payload_len
_TRAILER_LEN = 2  # crc16


class CodecError(Exception):
    pass


class EmptyInput(CodecError):
    pass


class BlockLengthError(CodecError):
    pass


class BudgetExceeded(CodecError):
    pass


class DecodeError(CodecError):
    pass


class BadPreamble(DecodeError):
    pass


class CrcMismatch(DecodeError):
    pass


class MalformedCertificate(DecodeError):
    pass


# On-air budget per band, bytes: what the channel can carry in one frame.
# RFID is the passive-tag kilobyte, optical-class bands the QR-code two
# kilobytes, radio bands a generous plumbing ceiling so the budget check is
# exercised everywhere.
DEFAULT_BUDGETS: dict[FrequencyBand, int] = {
    FrequencyBand.L_BAND: 4096,
    FrequencyBand.X_BAND: 4096,
    FrequencyBand.MICROWAVE: 4096,
    FrequencyBand.WIFI: 4096,
    FrequencyBand.INFRARED: 2048,
    FrequencyBand.OPTICAL: 2048,
    FrequencyBand.THERMAL: 2048,
    FrequencyBand.RFID_LF: 1024,
    FrequencyBand.RFID_HF: 1024,
    FrequencyBand.RFID_UHF: 1024,
}


@dataclass(frozen=True)
class ChannelBudget:
    band: FrequencyBand
    max_payload_bytes: int


# ---------------------------------------------------------------------------
# CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor
# ---------------------------------------------------------------------------

_CRC_POLY = 0x1021


def _crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ _CRC_POLY) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _crc_table()


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE of ``data`` ("123456789" -> 0x29B1)."""
    if not data:
        raise EmptyInput("crc16 of empty input")
    crc = 0xFFFF
    for byte in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[(crc >> 8) ^ byte]
    return crc


# ---------------------------------------------------------------------------
# Hamming(7,4)
# ---------------------------------------------------------------------------


def _hamming_encode_nibble(nibble: int) -> int:
    d1 = (nibble >> 3) & 1
    d2 = (nibble >> 2) & 1
    d3 = (nibble >> 1) & 1
    d4 = nibble & 1
    p1 = d1 ^ d2 ^ d4
    p2 = d1 ^ d3 ^ d4
    p3 = d2 ^ d3 ^ d4
    # bit order p1 p2 d1 p3 d2 d3 d4, MSB first
    return (p1 << 6) | (p2 << 5) | (d1 << 4) | (p3 << 3) | (d2 << 2) | (d3 << 1) | d4


_ENC_TABLE = [_hamming_encode_nibble(n) for n in range(16)]


def _hamming_decode_word(word: int) -> tuple[int, int]:
    """Return (nibble, corrected_bits) for a 7-bit word, fixing one flip."""
    # positions 1..7 left to right
    b = [(word >> (7 - i)) & 1 for i in range(1, 8)]
    s1 = b[0] ^ b[2] ^ b[4] ^ b[6]
    s2 = b[1] ^ b[2] ^ b[5] ^ b[6]
    s3 = b[3] ^ b[4] ^ b[5] ^ b[6]
    syndrome = (s3 << 2) | (s2 << 1) | s1
    corrected = 0
    if syndrome:
        b[syndrome - 1] ^= 1
        corrected = 1
    nibble = (b[2] << 3) | (b[4] << 2) | (b[5] << 1) | b[6]
    return nibble, corrected


_DEC_TABLE = [_hamming_decode_word(w) for w in range(128)]


def fec_encode(data: bytes) -> bytes:
    """Hamming(7,4)-encode; output grows by 7/4 on bits, zero-padded."""
    out = bytearray()
    acc = 0
    accbits = 0
    for byte in data:
        for nibble in (byte >> 4, byte & 0xF):
            acc = (acc << 7) | _ENC_TABLE[nibble]
            accbits += 7
            while accbits >= 8:
                accbits -= 8
                out.append((acc >> accbits) & 0xFF)
    if accbits:
        out.append((acc << (8 - accbits)) & 0xFF)
    return bytes(out)


def fec_decode(coded: bytes) -> tuple[bytes, int]:
    """Decode, correcting up to one flipped bit per 7-bit block.

    Returns (data, corrected_bits).  Raises BlockLengthError when the input
    length cannot hold a whole number of byte-forming block pairs.
    """
    nblocks = (8 * len(coded)) // 7
    if nblocks % 2 != 0:
        raise BlockLengthError(f"{len(coded)} coded bytes do not form whole bytes")
    out = bytearray()
    corrected = 0
    acc = 0
    accbits = 0
    produced = 0
    high = 0
    for byte in coded:
        acc = (acc << 8) | byte
        accbits += 8
        while accbits >= 7 and produced < nblocks:
            accbits -= 7
            nibble, fixed = _DEC_TABLE[(acc >> accbits) & 0x7F]
            corrected += fixed
            if produced % 2 == 0:
                high = nibble
            else:
                out.append((high << 4) | nibble)
            produced += 1
    return bytes(out), corrected


def coded_frame_len(payload_len: int) -> int:
    """On-air bytes for a payload of the given length (pure, monotone)."""
    frame_len = _HEADER_LEN + payload_len + _TRAILER_LEN
    return (frame_len * 14 + 7) // 8


# ---------------------------------------------------------------------------
# Frames
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BeaconFrame:
    band: FrequencyBand
    payload: bytes

    @property
    def crc(self) -> int:
        return crc16(self._crc_region())

    def _crc_region(self) -> bytes:
        return (
            bytes([self.band.ordinal])
            + len(self.payload).to_bytes(2, "big")
            + self.payload
        )

    def to_bytes(self) -> bytes:
        return PREAMBLE + self._crc_region() + self.crc.to_bytes(2, "big")


@dataclass(frozen=True)
class BeaconDecode:
    certificate: EmblemCertificate
    corrected_bits: int
    band: FrequencyBand


def encode_frame(
    payload: bytes,
    band: FrequencyBand,
    budgets: dict[FrequencyBand, int] | None = None,
) -> bytes:
    """Frame and FEC-encode an arbitrary payload for one band."""
    if len(payload) > 0xFFFF:
        raise BudgetExceeded("payload length exceeds the 16-bit length field")
    budget = (budgets or DEFAULT_BUDGETS)[band]
    on_air = coded_frame_len(len(payload))
    if on_air > budget:
        raise BudgetExceeded(
            f"{on_air} coded bytes exceed the {budget}-byte budget of {band.value}"
        )
    return fec_encode(BeaconFrame(band, payload).to_bytes())


def decode_frame(coded: bytes) -> tuple[FrequencyBand, bytes, int]:
    """Inverse of encode_frame on a clean or 1-flip-per-block channel.

    Never returns a payload whose CRC check failed.
    """
    frame, corrected = fec_decode(coded)
    if len(frame) < _HEADER_LEN + _TRAILER_LEN:
        raise BadPreamble("frame shorter than header and trailer")
    if frame[:2] != PREAMBLE:
        raise BadPreamble(f"bad preamble {frame[:2].hex()}")
    payload_len = int.from_bytes(frame[3:5], "big")
    if len(frame) != _HEADER_LEN + payload_len + _TRAILER_LEN:
        raise CrcMismatch("declared payload length inconsistent with frame size")
    payload = frame[_HEADER_LEN : _HEADER_LEN + payload_len]
    stored = int.from_bytes(frame[-2:], "big")
    if crc16(frame[2:-2]) != stored:
        raise CrcMismatch("checksum mismatch")
    try:
        band = FrequencyBand.from_ordinal(frame[2])
    except ValueError as exc:
        raise MalformedCertificate(str(exc)) from exc
    return band, payload, corrected


def encode_beacon(
    cert: EmblemCertificate,
    band: FrequencyBand,
    budgets: dict[FrequencyBand, int] | None = None,
) -> bytes:
    """FEC-coded beacon frame carrying the certificate."""
    return encode_frame(cert.to_bytes(), band, budgets)


def decode_beacon(coded: bytes) -> BeaconDecode:
    """Recover the certificate from a coded frame, or raise a DecodeError."""
    band, payload, corrected = decode_frame(coded)
    if len(payload) != CERT_LEN:
        raise MalformedCertificate(
            f"certificate payload must be {CERT_LEN} bytes, got {len(payload)}"
        )
    try:
        cert = EmblemCertificate.from_bytes(payload)
    except Exception as exc:
        raise MalformedCertificate(str(exc)) from exc
    return BeaconDecode(cert, corrected, band)
