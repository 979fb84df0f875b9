from setuptools import find_packages, setup

from svx import __version__


def read_md(filename):
    try:
        from pypandoc import convert
        return convert(filename, 'rst')
    except ImportError:
        print("warning: pypandoc module not found, could not convert Markdown to RST")
        return open(filename, 'r').read()


setup(
    name='pytest-svx',
    version=__version__,
    license='GPLv2',
    install_requires=['numpy', 'scipy>=1.10', 'scikit-image', 'pytest'],
    description='Supervoxel refinement of volumetric pseudo-labels, with a pytest plugin for phantom cases',
    long_description=read_md('README.md'),
    packages=find_packages(exclude=['test', 'test.*']),
    package_data={'svx': ['schemas/*.json']},
    platforms='any',
    python_requires='>=3.8',
    classifiers=[
        'License :: OSI Approved :: GNU General Public License v2 (GPLv2)',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Medical Science Apps.',
        'Framework :: Pytest',
        ],
    entry_points={
        'console_scripts': [
            'svx = svx.cli:main',
        ],
        'pytest11': [
            'svx = svx.plugin',
        ],
    },
)
