##@package gradgate
# Command-line entry point.

import getopt
import logging
import os
import sys
import time

from gradgate.config import ExperimentConfig, FEATURE_MODES
from gradgate.errors import GradGateError, ConfigError
from gradgate.experiment import Experiment
from gradgate.metrics import formatTable

COMMANDS = ('train-classifier', 'gen-anomalies', 'extract-features', 'detect', 'run-experiment', 'compare-norms')


## Entry point of the program.
# @param argv Program parameters.
# @return Exit code: 0 on success, 1 on failure, 2 on invalid usage.
def main(argv):
    # Default parameters
    configPath = None
    overrides = {}
    mode = None
    checkpoint = None
    datasets = []
    verbose = False

    # Parse parameters
    if len(argv) < 1 or argv[0] in ('-h', '--help'):
        displayHelp()
        return 0 if argv else 2
    command = argv[0]
    if command not in COMMANDS:
        print('Unknown command "%s".' % command)
        displayHelp()
        return 2

    try:
        opts, args = getopt.gnu_getopt(argv[1:], 'c:o:s:m:k:d:vh',
                                       ['config=', 'out=', 'seed=', 'mode=', 'checkpoint=', 'dataset=', 'verbose',
                                        'help'])
    except getopt.GetoptError as err:
        print(err)
        displayHelp()
        return 2
    for opt, arg in opts:
        if opt in ('-c', '--config'):
            configPath = arg
        elif opt in ('-o', '--out'):
            overrides[('experiment', 'out')] = arg
        elif opt in ('-s', '--seed'):
            try:
                overrides[('experiment', 'seed')] = int(arg)
            except ValueError:
                print('Invalid seed "%s".' % arg)
                return 2
        elif opt in ('-m', '--mode'):
            if arg not in FEATURE_MODES:
                print('Invalid mode "%s" (expected one of %s).' % (arg, ', '.join(FEATURE_MODES)))
                return 2
            mode = arg
        elif opt in ('-k', '--checkpoint'):
            checkpoint = arg
        elif opt in ('-d', '--dataset'):
            datasets.append(arg)
        elif opt in ('-v', '--verbose'):
            verbose = True
        elif opt in ('-h', '--help'):
            displayHelp()
            return 0

    if command == 'detect' and len(args) != 2:
        print('The detect command needs the normal and the anomalous feature files.')
        return 2
    if command == 'extract-features' and len(datasets) == 0 and len(args) > 0:
        datasets = args
    elif command != 'detect' and len(args) > 0:
        print('Unexpected arguments %s.' % ' '.join(args))
        return 2

    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        tic = time.time()
        checkFiles(datasets + (args if command == 'detect' else []) + ([checkpoint] if checkpoint else []))
        run(command, ExperimentConfig(configPath, overrides), mode, checkpoint, datasets, args)
        logging.getLogger(__name__).info('%s done in %.2fs.', command, time.time() - tic)
    except GradGateError as e:
        print('ERROR: %s' % e)
        return 1
    return 0


## Check that input files exist.
# @param paths File paths.
def checkFiles(paths):
    for path in paths:
        if not os.path.isfile(path):
            raise ConfigError('File "%s" not found.' % path)


## Execute a command.
# @param command Name of the command.
# @param config ExperimentConfig.
# @param mode Feature mode, None for the configured one.
# @param checkpoint Classifier checkpoint path or None.
# @param datasets Dataset paths.
# @param args Positional arguments.
def run(command, config, mode, checkpoint, datasets, args):
    experiment = Experiment(config)
    if command == 'train-classifier':
        path = experiment.trainClassifier()
        model = experiment.loadClassifier(path)
        print('Classifier: %s' % path)
        print('\tvalidation accuracy: %s' % model.metadata.get('valAccuracy', '-'))
        print('\ttest accuracy: %s' % model.metadata.get('testAccuracy', '-'))
    elif command == 'gen-anomalies':
        print('Clean test set: %s' % experiment.cleanPath())
        for source, path in experiment.genAnomalies(checkpoint).items():
            print('\t%s: %s' % (source, path))
    elif command == 'extract-features':
        if not datasets:
            experiment.genAnomalies(checkpoint)
            datasets = [experiment.cleanPath()]
        for dataset in datasets:
            print(experiment.extractFeatures(dataset, mode, checkpoint))
    elif command == 'detect':
        scoresPath, report = experiment.detect(args[0], args[1], mode)
        print('Scores: %s\n' % scoresPath)
        print(formatTable([report]))
    elif command == 'run-experiment':
        print(formatTable(experiment.runExperiment()))
    elif command == 'compare-norms':
        print(experiment.compareNorms(datasets if datasets else None, checkpoint))


## Display help of the program.
def displayHelp():
    text = ''
    text += 'Usage :\n\tpython -m gradgate command [options] [arguments]\n'
    text += 'Detect adversarial and out-of-distribution inputs from the gradients of a confounding label.\n'

    text += '\nCommands:\n'
    text += '   train-classifier                  Train the classifier or reuse its checkpoint.\n'
    text += '   gen-anomalies                     Generate the adversarial and out-of-distribution sets.\n'
    text += '   extract-features [data.gdata]     Extract the features of datasets (the clean test set by default).\n'
    text += '   detect normal.csv anomalous.csv   Train a detector on two feature files and report its metrics.\n'
    text += '   run-experiment                    Run every stage and print the table of results.\n'
    text += '   compare-norms                     Compare per-layer gradient and activation norms per source.\n'

    text += '\nOptions:\n'
    text += '   -c exp.ini   --config exp.ini      Configuration file.\n'
    text += '   -o folder    --out folder          Output folder of the artifacts.\n'
    text += '   -s 0         --seed 0              Master seed.\n'
    text += '   -m gradient  --mode gradient       Feature mode: gradient or activation.\n'
    text += '   -k file      --checkpoint file     Classifier checkpoint to use.\n'
    text += '   -d file      --dataset file        Dataset to process, repeatable.\n'
    text += '   -v           --verbose             Verbose mode.\n'
    text += '   -h           --help                Display this help.\n'

    print(text)


# Starting point from python #
if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
