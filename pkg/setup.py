from setuptools import setup, find_packages

setup(name='gradgate',
      version='1.0.0',
      description='Detect adversarial and out-of-distribution inputs from the gradients of a confounding label.',
      packages=find_packages(exclude=['tests']),
      install_requires=['numpy', 'scipy', 'scikit-learn'],
      zip_safe=False)
