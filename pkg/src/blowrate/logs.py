"""
File logger used through the package as constants.LOG
"""
import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

FORMAT = '%(asctime)s %(levelname)-7s %(module)s: %(message)s'


def get_filelog(logfile_path, name='blowrate', level=logging.INFO):
    """
    Return a logger writing to logfile_path (dirs made if reqd).
    Nothing below WARNING goes to the terminal unless add_console is called
    """
    log = logging.getLogger(name)

    # only set up once per process, eg when constants is reimported
    if log.handlers:
        return log

    log.setLevel(level)
    log.propagate = False

    logfile_path = Path(logfile_path)
    try:
        logfile_path.parent.mkdir(parents=True, exist_ok=True)
        handler = RotatingFileHandler(logfile_path, maxBytes=5_000_000,
                                      backupCount=3)
    except OSError:
        # read-only home, sandboxed CI etc
        handler = logging.NullHandler()

    handler.setFormatter(logging.Formatter(FORMAT))
    log.addHandler(handler)

    return log


def add_console(log, level=logging.INFO):
    """
    Also echo to stderr (the cli -v flag)
    """
    if any(getattr(h, '_blowrate_console', False) for h in log.handlers):
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter('%(levelname)s %(message)s'))
    handler._blowrate_console = True
    log.addHandler(handler)
