"""
maskwatch: margin-softmax face embeddings, gallery identification, a no-mask
alert pipeline and WIDER-style detection evaluation.
"""

from maskwatch.base import MaskwatchError
from maskwatch.gallery import Gallery, enroll, identify
from maskwatch.marginloss import MarginSpec

__version__ = "0.1.0"
__all__ = ["Gallery", "MarginSpec", "MaskwatchError", "enroll", "identify"]
