"""emblemsim: a deterministic protocol library and discrete-event simulator
for a digital, cross-frequency protective emblem.

Emitters mark protected entities across radio, optical and RFID bands;
weapon systems verify emblems through a beacon -> GPS -> registry -> RFID
pipeline inside an F2T2EA engagement cycle, with certificate-based trust,
revocation, and a human-in-the-loop abort channel.
"""

from .model import (
    DEFAULT_BANDS,
    Entity,
    EntityKind,
    FrequencyBand,
    Mobility,
    Position,
    ProtectionMode,
    Sensing,
    VerificationStrategy,
    distance,
    protection_matrix_lookup,
)
from .trust import (
    EmblemCertificate,
    MockSigner,
    Ed25519Signer,
    Registry,
    RegistryRecord,
    RevocationList,
    TrustChain,
    Verdict,
    issue_certificate,
    registry_query,
    revoke,
    verify_certificate,
)
from .codec import crc16, decode_beacon, encode_beacon, fec_decode, fec_encode
from .channel import Delivery, DeliveryStatus, Emitter, JammerField, collision_set, deliver, in_range
from .rfid import ChallengeOutcome, Tag, challenge_response, inventory_aloha, inventory_tree
from .geo import GpsFix, SatelliteSignal, localize_emitter, trilaterate
from .engagement import (
    EngagementPolicy,
    EngagementState,
    Outcome,
    Phase,
    decide_from_evidence,
    replay_log,
    resolve_operator,
    step,
)
from .scenario import Scenario, canonical_dumps, dump_scenario, load_scenario
from .runner import RunResult, run, run_sweep
from .metrics import MetricsReport, fold_log_lines

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
