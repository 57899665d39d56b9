from stratsim.cli import main

raise SystemExit(main())
