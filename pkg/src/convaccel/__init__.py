"""Bit-exact, cycle-accounting simulator of a line-buffered FPGA convolution datapath."""

__version__ = "0.1.0"
