"""Fully-distributed threshold key management.

Submodules: groups (Schnorr-group algebra), shamir (threshold sharing),
threshold (quorum signatures), credentials (proxy credentials,
self-generated certificates, authenticated channels), service (roster,
quorum selection, share issuance, fairness audit).
"""

from .credentials import (
    Certificate,
    ChannelEndpoint,
    ChannelError,
    CredentialError,
    KeyPair,
    ProxyCredential,
    Warrant,
    channel_finish,
    channel_offer,
    channel_respond,
    decode_certificate,
    encode_certificate,
    establish_secure_channel,
    generate_keypair,
    self_generate_certificate,
    verify_certificate,
    verify_credential,
)
from .groups import (
    DEMO_GROUP,
    TOY_GROUP,
    GroupError,
    GroupParams,
    dump_group,
    generate_group,
    group_2048,
    is_probable_prime,
    load_group,
)
from .service import (
    KMService,
    RosterError,
    ServiceUnavailable,
    Shareholder,
    TranscriptEntry,
)
from .shamir import (
    InsufficientSharesError,
    KeyShare,
    KMConfig,
    MasterKeyPair,
    ShareError,
    lagrange_at,
    poly_eval,
    reconstruct,
    setup,
    share_polynomial,
)
from .threshold import (
    NonceReuseError,
    PartialSignature,
    Signature,
    SigningError,
    SigningSession,
    challenge,
    combine_partials,
    sign_single,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
