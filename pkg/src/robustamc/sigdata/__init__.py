"""Signal and dataset layer: modulation synthesis, channel, containers, file I/O."""

from .channel import ChannelProfile, apply_channel
from .dataset import (
    DEFAULT_FRAME_LEN,
    DEFAULT_SPS,
    DatasetRole,
    DomainDataset,
    IQFrame,
    build_domain,
    synth_frame,
)
from .io import load_dataset, load_raw_iq, save_dataset
from .modulation import (
    ALL_CLASSES,
    CONSTELLATIONS,
    DIGITAL_CLASSES,
    ModulationClass,
    map_symbols,
    synth_analog,
    synth_clean_signal,
)

__all__ = [
    "ALL_CLASSES",
    "CONSTELLATIONS",
    "DEFAULT_FRAME_LEN",
    "DEFAULT_SPS",
    "DIGITAL_CLASSES",
    "ChannelProfile",
    "DatasetRole",
    "DomainDataset",
    "IQFrame",
    "ModulationClass",
    "apply_channel",
    "build_domain",
    "load_dataset",
    "load_raw_iq",
    "map_symbols",
    "save_dataset",
    "synth_analog",
    "synth_clean_signal",
    "synth_frame",
]
