"""Layout generation package: raster, ConvGRU state, decoder, training."""
