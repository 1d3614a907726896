from holorestore.cli import main

raise SystemExit(main())
