"""Customer segmentation for retail ledgers: RFM scoring plus five clusterers."""

__version__ = "0.1.0"
