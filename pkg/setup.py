from setuptools import setup

setup(
    name='ncascope',
    version='0.1',
    py_modules=['ncascope', 'experiment', 'regression_test'],
    packages=['nca', 'analysis', 'stages'],
    install_requires=[
        'Click', 'pyyaml', 'numpy', 'scipy', 'torch', 'pandas', 'matplotlib', 'pillow', 'ripser'
    ],
    entry_points='''
        [console_scripts]
        nca-scope=ncascope:cli
    ''',
)
