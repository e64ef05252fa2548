from app import app


def main():
    """Console entry point: lasiq <subcommand>"""
    app(prog_name="lasiq")


if __name__ == '__main__':
    main()
