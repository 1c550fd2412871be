"""clawsim: a deterministic, in-process implementation of a compute-cost
indexed token protocol (robust cost index, attested oracle, NAV-based
mint/redeem vault with risk controls, atomic multi-hop settlement) plus a
seeded multi-agent economy simulator comparing monetary regimes."""

__version__ = "0.1.0"
