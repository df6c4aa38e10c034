"""Distance-geometric graph convolutions on 3D graphs."""
