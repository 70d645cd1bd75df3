from setuptools import setup

setup(
    name='rescen',
    version='0.1',
    description='Scenario approximation of robust convex programs.',
    author='Enzo Busseti',
    license='GPLv3+',
    packages=['rescen'],
    install_requires=['numpy', 'scipy', 'pandas', 'numba'],
    entry_points={'console_scripts': ['rescen=rescen.cli:main']}
)
