__version__ = '0.1.0'


T1 = 'T1'
T1GD = 'T1Gd'
T2 = 'T2'
FLAIR = 'FLAIR'

MODALITY_ROLES = (T1, T1GD, T2, FLAIR)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class SvxError(Exception):
    exit_code = EXIT_DATA


class ParamError(SvxError, ValueError):
    exit_code = EXIT_USAGE


class ConfigError(SvxError):
    exit_code = EXIT_USAGE


class FormatError(SvxError):
    pass


class DataError(SvxError):
    pass


class IoError(SvxError, IOError):
    pass


class InternalError(SvxError):
    pass


class StateError(SvxError):
    pass


class EmptySeedError(SvxError):

    def __init__(self, message='Seed mask has no foreground voxels.'):
        super(EmptySeedError, self).__init__(message)


class NoSeedOverlapError(SvxError):

    def __init__(self, threshold):
        message = 'No supervoxel has more than {:.0%} of its voxels inside the seed.'.format(threshold)
        super(NoSeedOverlapError, self).__init__(message)
        self.threshold = threshold


class EmptyMaskError(SvxError):
    pass


class MissingFileError(SvxError):

    def __init__(self, path):
        message = 'Required file "{}" does not exist.'.format(path)
        super(MissingFileError, self).__init__(message)
        self.path = path
