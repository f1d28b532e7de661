"""Image and deformation I/O, run configuration, diagnostics and the command line."""

from metamorph.io_cli.images import ChannelMode, load_image, save_image
from metamorph.io_cli.deformation_file import (
    encode_deformation,
    decode_deformation,
    read_deformation,
    write_deformation,
)
from metamorph.io_cli.config import RunConfig, build_run_config, parse_config_file
from metamorph.io_cli.outputs import save_outputs, render_frames, load_saved_path
from metamorph.io_cli.cli import cli_main
