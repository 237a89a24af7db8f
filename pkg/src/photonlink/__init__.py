"""Link engineering for long-distance single-photon communication.

Modules: :mod:`~photonlink.fock` (Fock-state optics), :mod:`~photonlink.amplifier`
(heralded qubit amplifier), :mod:`~photonlink.linkbudget` (direct-link loss
arithmetic), :mod:`~photonlink.repeater` (repeater-chain simulation) and
:mod:`~photonlink.cli`.
"""

__version__ = "0.1.0"
