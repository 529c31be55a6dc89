from prompt_ttt.cli.cli_main import main

if __name__ == "__main__":
    main()
