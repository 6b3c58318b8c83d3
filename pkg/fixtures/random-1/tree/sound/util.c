
#ifdef CONFIG_MMC
#include <linux/util.h>
#define UTIL_MAX 16
int util_count;
#endif

#if defined(CONFIG_SND) && defined(CONFIG_HID)
static const char util_name[] = "util";
#endif
	pr_info("util\n");
#if IS_MODULE(CONFIG_MMC)
	return 0;
#endif
static const char util_name[] = "util";
static const char util_name[] = "util";
#if defined(CONFIG_SND) && defined(CONFIG_MMC)
static const char util_name[] = "util";
	return 0;
#endif
int util_count;
	/* nothing to do */
	util_count++;
#include <linux/util.h>
	/* nothing to do */
int util_count;
