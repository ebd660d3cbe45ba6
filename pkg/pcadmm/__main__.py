import fire

from pcadmm.cli import COMMANDS


def main():
    fire.Fire(COMMANDS)

if __name__ == '__main__':
    main()
