"""Knowledge-aided iterative detection and decoding for LDPC-coded multiuser MIMO."""

__version__ = "0.1.0"
