from linflow.cli import main

raise SystemExit(main())
