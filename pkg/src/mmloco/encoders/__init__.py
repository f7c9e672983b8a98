"""Multi-modal context encoder: proprioceptive mixer, point encoder, fusion and decoders."""
from .networks import (HEIGHT_SHAPE, HISTORY, OBS_DIM, ContextEncoder, EncoderConfig,
                       LatentContext, ModalityMixer, PointEncoder, ProprioEncoder,
                       confidence_mask, point_statistic)
from .sampling import STD_MAX, STD_MIN, GaussianHead, GaussianLatent, bounded_std, constrained_sample
