from .extractor import (
    FeatureParams,
    FeatureVector,
    WindowFeatureExtractor,
    axis_features,
    extract_window_features,
    read_feature_csv,
    write_feature_csv,
)
from .schema import Family, FeatureDescriptor, FeatureSchema, build_schema
from .transforms import (
    Spectrum,
    StftParams,
    amplitude,
    magnitude,
    mean,
    periodogram,
    shannon_entropy,
    spectral_centroid,
    spectral_skewness,
    spectral_spread,
    std_dev,
    stft,
    wavelet_packet_energies,
    wavelet_packet_nodes,
)
